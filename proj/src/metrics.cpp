#include "cif/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

namespace cif {

namespace {

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

void require_points(const PointCloud& c, const char* op) {
  if (c.empty()) throw std::invalid_argument(std::string(op) + ": cloud '" + c.id + "' is empty");
}

void require_corpus(const std::vector<PointCloud>& c, const char* op, const char* which) {
  if (c.empty()) throw std::invalid_argument(std::string(op) + ": " + which + " corpus is empty");
}

double directed(const PointCloud& from, const PointCloud& to, bool squared) {
  double total = 0.0;
  for (const auto& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to.points) best = std::min(best, squared_distance(p, q));
    total += squared ? best : std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("solve_assignment: cost matrix is not n x n");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) minv[j] = cur, way[j] = j0;
        if (minv[j] < delta) delta = minv[j], j1 = j;
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col(n);
  for (std::size_t j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

double chamfer(const PointCloud& a, const PointCloud& b, bool squared) {
  require_points(a, "chamfer");
  require_points(b, "chamfer");
  return directed(a, b, squared) + directed(b, a, squared);
}

double emd(const PointCloud& a, const PointCloud& b, std::size_t exact_threshold, bool mean) {
  require_points(a, "emd");
  require_points(b, "emd");
  if (a.size() != b.size()) {
    throw std::invalid_argument("emd: clouds have " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                                " points; resample both to the same size first");
  }
  const std::size_t n = a.size();
  if (n > exact_threshold) {
    throw std::invalid_argument("emd: " + std::to_string(n) + " points exceeds the exact-assignment threshold " +
                                std::to_string(exact_threshold) + "; subsample the clouds first");
  }
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::sqrt(squared_distance(a.points[i], b.points[j]));
  const auto col = solve_assignment(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + col[i]];
  return mean ? total / static_cast<double>(n) : total;
}

double DistanceKernel::operator()(const PointCloud& a, const PointCloud& b) const {
  return kind == DistanceKind::Chamfer ? chamfer(a, b, chamfer_squared) : emd(a, b, emd_exact_threshold, emd_mean);
}

std::string DistanceKernel::name() const { return kind == DistanceKind::Chamfer ? "cd" : "emd"; }

std::vector<double> distance_matrix(const std::vector<PointCloud>& a, const std::vector<PointCloud>& b,
                                    const DistanceKernel& kernel) {
  std::vector<double> d(a.size() * b.size());
  if (&a == &b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = i + 1; j < a.size(); ++j) d[i * a.size() + j] = d[j * a.size() + i] = kernel(a[i], a[j]);
    }
    return d;
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) d[i * b.size() + j] = kernel(a[i], b[j]);
  return d;
}

std::vector<double> voxel_histogram(const std::vector<PointCloud>& corpus, const JsdConfig& config,
                                    std::size_t* clipped) {
  if (config.resolution == 0 || !(config.bound > 0.0)) throw std::invalid_argument("jsd: invalid grid");
  const std::size_t r = config.resolution;
  std::vector<double> counts(r * r * r, 0.0);
  std::size_t outside = 0;
  const double width = 2.0 * config.bound / static_cast<double>(r);
  for (const auto& cloud : corpus) {
    for (const auto& p : cloud.points) {
      std::size_t idx[3];
      bool out = false;
      for (int k = 0; k < 3; ++k) {
        if (!std::isfinite(p[k])) throw std::invalid_argument("jsd: non-finite point in cloud '" + cloud.id + "'");
        if (p[k] < -config.bound || p[k] > config.bound) out = true;
        const double cell = std::floor((p[k] + config.bound) / width);
        idx[k] = cell < 0.0 ? 0 : std::min(r - 1, static_cast<std::size_t>(cell));
      }
      if (out) ++outside;
      counts[(idx[0] * r + idx[1]) * r + idx[2]] += 1.0;
    }
  }
  if (clipped != nullptr) *clipped = outside;
  return counts;
}

JsdResult jsd(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const JsdConfig& config) {
  require_corpus(gen, "jsd", "generated");
  require_corpus(ref, "jsd", "reference");
  JsdResult result;
  auto p = voxel_histogram(gen, config, &result.clipped_gen);
  auto q = voxel_histogram(ref, config, &result.clipped_ref);
  double sp = 0.0, sq = 0.0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (sp == 0.0 || sq == 0.0) throw std::invalid_argument("jsd: corpus has no points");
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i] / sp, qi = q[i] / sq, m = 0.5 * (pi + qi);
    if (pi > 0.0) kl_p += pi * std::log(pi / m);
    if (qi > 0.0) kl_q += qi * std::log(qi / m);
  }
  result.value = std::max(0.0, 0.5 * kl_p + 0.5 * kl_q);
  return result;
}

MmdCov mmd_cov_from_matrix(const std::vector<double>& gen_ref, std::size_t n_gen, std::size_t n_ref) {
  if (n_gen == 0 || n_ref == 0) throw std::invalid_argument("mmd_cov: corpora must be nonempty");
  if (gen_ref.size() != n_gen * n_ref) throw std::invalid_argument("mmd_cov: distance matrix has wrong size");
  double total = 0.0;
  for (std::size_t j = 0; j < n_ref; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_gen; ++i) best = std::min(best, gen_ref[i * n_ref + j]);
    total += best;
  }
  std::set<std::size_t> covered;
  for (std::size_t i = 0; i < n_gen; ++i) {
    std::size_t best_j = 0;
    for (std::size_t j = 1; j < n_ref; ++j)
      if (gen_ref[i * n_ref + j] < gen_ref[i * n_ref + best_j]) best_j = j;
    covered.insert(best_j);
  }
  return {total / static_cast<double>(n_ref), static_cast<double>(covered.size()) / static_cast<double>(n_ref)};
}

MmdCov mmd_cov(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const DistanceKernel& kernel) {
  require_corpus(gen, "mmd_cov", "generated");
  require_corpus(ref, "mmd_cov", "reference");
  return mmd_cov_from_matrix(distance_matrix(gen, ref, kernel), gen.size(), ref.size());
}

double one_nna_from_matrices(const std::vector<double>& gen_gen, const std::vector<double>& gen_ref,
                             const std::vector<double>& ref_ref, std::size_t n_gen, std::size_t n_ref) {
  const std::size_t n = n_gen + n_ref;
  if (n < 2) throw std::invalid_argument("one_nna: pooled corpus needs at least 2 clouds");
  if (gen_gen.size() != n_gen * n_gen || gen_ref.size() != n_gen * n_ref || ref_ref.size() != n_ref * n_ref) {
    throw std::invalid_argument("one_nna: distance matrices have wrong sizes");
  }
  auto dist = [&](std::size_t i, std::size_t j) {
    if (i < n_gen && j < n_gen) return gen_gen[i * n_gen + j];
    if (i < n_gen) return gen_ref[i * n_ref + (j - n_gen)];
    if (j < n_gen) return gen_ref[j * n_ref + (i - n_gen)];
    return ref_ref[(i - n_gen) * n_ref + (j - n_gen)];
  };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist(i, j);
      if (best == n || d < best_d) best = j, best_d = d;
    }
    if ((i < n_gen) == (best < n_gen)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double one_nna(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const DistanceKernel& kernel) {
  if (gen.size() + ref.size() < 2) throw std::invalid_argument("one_nna: pooled corpus needs at least 2 clouds");
  return one_nna_from_matrices(distance_matrix(gen, gen, kernel), distance_matrix(gen, ref, kernel),
                               distance_matrix(ref, ref, kernel), gen.size(), ref.size());
}

std::string MetricsReport::key_values() const {
  std::string out;
  auto line = [&](const char* key, const std::string& value) { out += std::string(key) + " " + value + "\n"; };
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) line(key, fmt(*v));
  };
  opt("jsd", jsd);
  opt("mmd_cd", mmd_cd);
  opt("mmd_emd", mmd_emd);
  opt("cov_cd", cov_cd);
  opt("cov_emd", cov_emd);
  opt("nna_cd", nna_cd);
  opt("nna_emd", nna_emd);
  line("n_gen", std::to_string(n_gen));
  line("n_ref", std::to_string(n_ref));
  line("chamfer_squared", chamfer_squared ? "1" : "0");
  line("emd_mean", emd_mean ? "1" : "0");
  line("emd_exact_threshold", std::to_string(emd_exact_threshold));
  line("jsd_resolution", std::to_string(jsd_config.resolution));
  line("jsd_bound", fmt(jsd_config.bound));
  line("jsd_clipped_gen", std::to_string(jsd_clipped_gen));
  line("jsd_clipped_ref", std::to_string(jsd_clipped_ref));
  return out;
}

std::string MetricsReport::csv_header() const {
  return "jsd,mmd_cd,mmd_emd,cov_cd,cov_emd,nna_cd,nna_emd,n_gen,n_ref";
}

std::string MetricsReport::csv_row(bool table) const {
  auto cell = [&](const std::optional<double>& v, double factor) { return v ? fmt(*v * (table ? factor : 1.0)) : ""; };
  return cell(jsd, 1.0) + "," + cell(mmd_cd, 1e3) + "," + cell(mmd_emd, 1e2) + "," + cell(cov_cd, 1e2) + "," +
         cell(cov_emd, 1e2) + "," + cell(nna_cd, 1e2) + "," + cell(nna_emd, 1e2) + "," + std::to_string(n_gen) + "," +
         std::to_string(n_ref);
}

MetricsReport evaluate(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
                       const EvalOptions& options) {
  require_corpus(gen, "evaluate", "generated");
  require_corpus(ref, "evaluate", "reference");
  MetricsReport report;
  report.n_gen = gen.size();
  report.n_ref = ref.size();
  report.chamfer_squared = options.base.chamfer_squared;
  report.emd_mean = options.base.emd_mean;
  report.emd_exact_threshold = options.base.emd_exact_threshold;
  report.jsd_config = options.jsd;
  const JsdResult j = jsd(gen, ref, options.jsd);
  report.jsd = j.value;
  report.jsd_clipped_gen = j.clipped_gen;
  report.jsd_clipped_ref = j.clipped_ref;

  auto run = [&](DistanceKind kind, std::optional<double>& mmd, std::optional<double>& cov,
                 std::optional<double>& nna) {
    DistanceKernel k = options.base;
    k.kind = kind;
    const auto gr = distance_matrix(gen, ref, k);
    const MmdCov mc = mmd_cov_from_matrix(gr, gen.size(), ref.size());
    mmd = mc.mmd;
    cov = mc.cov;
    nna = one_nna_from_matrices(distance_matrix(gen, gen, k), gr, distance_matrix(ref, ref, k), gen.size(), ref.size());
  };
  if (options.chamfer) run(DistanceKind::Chamfer, report.mmd_cd, report.cov_cd, report.nna_cd);
  if (options.emd) run(DistanceKind::Emd, report.mmd_emd, report.cov_emd, report.nna_emd);
  return report;
}

}  // namespace cif
