#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cif/metrics.hpp"
#include "helpers.hpp"

using namespace cif;
using testing::random_cloud;

namespace {

double sq(const Point3& a, const Point3& b) {
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  double ab = 0, ba = 0;
  for (const auto& p : a.points) {
    double m = INFINITY;
    for (const auto& q : b.points) m = std::min(m, sq(p, q));
    ab += m;
  }
  for (const auto& q : b.points) {
    double m = INFINITY;
    for (const auto& p : a.points) m = std::min(m, sq(p, q));
    ba += m;
  }
  return ab / a.size() + ba / b.size();
}

double brute_emd(const PointCloud& a, const PointCloud& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double s = 0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += std::sqrt(sq(a.points[i], b.points[perm[i]]));
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / a.size();
}

std::vector<PointCloud> corpus(std::size_t n, std::size_t pts, Rng& rng, double scale = 0.4) {
  std::vector<PointCloud> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_cloud(pts, rng, scale * (1 + 0.1 * i)));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("EMD equals the minimum over all permutations") {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 1 + t % 6;
      PointCloud a = random_cloud(n, rng), b = random_cloud(n, rng);
      CHECK(emd(a, b) == doctest::Approx(brute_emd(a, b)).epsilon(1e-12));
      CHECK(emd(a, b, 1024, false) == doctest::Approx(brute_emd(a, b) * n).epsilon(1e-12));
    }
  }

  TEST_CASE("assignment solver is optimal on random integer costs") {
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
      const std::size_t n = 2 + t % 5;
      std::vector<double> cost(n * n);
      for (auto& c : cost) c = std::floor(uniform(rng, 0, 10));
      auto col = solve_assignment(cost, n);
      std::vector<std::size_t> seen(col);
      std::sort(seen.begin(), seen.end());
      for (std::size_t i = 0; i < n; ++i) CHECK(seen[i] == i);
      double got = 0;
      for (std::size_t i = 0; i < n; ++i) got += cost[i * n + col[i]];
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      double best = INFINITY;
      do {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += cost[i * n + perm[i]];
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(got == best);
    }
  }

  TEST_CASE("EMD input checks") {
    Rng rng(3);
    CHECK_THROWS_AS(emd(random_cloud(3, rng), random_cloud(4, rng)), std::invalid_argument);
    CHECK_THROWS_AS(emd(random_cloud(5, rng), random_cloud(5, rng), 4), std::invalid_argument);
    PointCloud a = random_cloud(7, rng);
    CHECK(emd(a, a) == 0.0);
  }

  TEST_CASE("Chamfer equals the double loop exactly") {
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
      PointCloud a = random_cloud(1 + t % 13, rng), b = random_cloud(1 + (t * 7) % 17, rng);
      CHECK(chamfer(a, b) == brute_chamfer(a, b));
    }
    PointCloud a = random_cloud(5, rng);
    CHECK(chamfer(a, a) == 0.0);
  }

  TEST_CASE("JSD of disjoint supports is log 2") {
    Rng rng(5);
    std::vector<PointCloud> left(3), right(3);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 50; ++k) {
        left[i].points.push_back({uniform(rng, -0.9, -0.1), uniform(rng, -1, 1), uniform(rng, -1, 1)});
        right[i].points.push_back({uniform(rng, 0.1, 0.9), uniform(rng, -1, 1), uniform(rng, -1, 1)});
      }
    CHECK(std::abs(jsd(left, right).value - std::log(2.0)) < 1e-10);
    CHECK(jsd(left, left).value == 0.0);
  }

  TEST_CASE("JSD clips and counts out-of-grid points") {
    PointCloud c;
    c.points = {{5, 0, 0}, {0, 0, 0}};
    std::size_t clipped = 0;
    auto h = voxel_histogram({c}, JsdConfig{}, &clipped);
    CHECK(clipped == 1);
    CHECK(std::accumulate(h.begin(), h.end(), 0.0) == 2.0);
  }

  TEST_CASE("MMD, COV and 1-NNA equal brute-force implementations") {
    Rng rng(6);
    for (auto kind : {DistanceKind::Chamfer, DistanceKind::Emd}) {
      auto gen = corpus(10, 6, rng), ref = corpus(10, 6, rng, 0.5);
      DistanceKernel k{kind};
      auto d = [&](const PointCloud& a, const PointCloud& b) {
        return kind == DistanceKind::Chamfer ? brute_chamfer(a, b) : brute_emd(a, b);
      };
      double mmd = 0;
      for (const auto& r : ref) {
        double m = INFINITY;
        for (const auto& g : gen) m = std::min(m, d(g, r));
        mmd += m;
      }
      mmd /= ref.size();
      std::vector<bool> hit(ref.size(), false);
      for (const auto& g : gen) {
        std::size_t arg = 0;
        for (std::size_t j = 1; j < ref.size(); ++j)
          if (d(g, ref[j]) < d(g, ref[arg])) arg = j;
        hit[arg] = true;
      }
      const double cov = static_cast<double>(std::count(hit.begin(), hit.end(), true)) / ref.size();

      std::vector<PointCloud> pool(gen);
      pool.insert(pool.end(), ref.begin(), ref.end());
      std::size_t right = 0;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        std::size_t arg = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < pool.size(); ++j)
          if (j != i && d(pool[i], pool[j]) < d(pool[i], pool[arg])) arg = j;
        right += (i < gen.size()) == (arg < gen.size());
      }
      const double nna = static_cast<double>(right) / pool.size();

      auto mc = mmd_cov(gen, ref, k);
      CHECK(mc.mmd == doctest::Approx(mmd).epsilon(1e-12));
      CHECK(mc.cov == cov);
      CHECK(one_nna(gen, ref, k) == nna);
    }
  }

  TEST_CASE("ties resolve to the lowest index") {
    // gen 0 is equidistant from ref 0 and ref 1.
    std::vector<double> gen_ref{1.0, 1.0};
    auto mc = mmd_cov_from_matrix(gen_ref, 1, 2);
    CHECK(mc.cov == 0.5);
    CHECK(mc.mmd == 1.0);
  }

  TEST_CASE("self-evaluation gives zero MMD and full coverage") {
    Rng rng(7);
    auto c = corpus(6, 5, rng);
    auto report = evaluate(c, c);
    CHECK(*report.mmd_cd == 0.0);
    CHECK(*report.mmd_emd == 0.0);
    CHECK(*report.cov_cd == 1.0);
    CHECK(*report.cov_emd == 1.0);
    CHECK(*report.jsd == 0.0);
  }

  TEST_CASE("report rendering") {
    MetricsReport r;
    r.mmd_cd = 0.00123;
    r.cov_cd = 0.5;
    r.nna_cd = 0.75;
    r.jsd = 0.1;
    CHECK(r.key_values().find("mmd_cd 0.00123") != std::string::npos);
    CHECK(r.key_values().find("mmd_emd") == std::string::npos);
    const std::string row = r.csv_row(true);
    CHECK(row.find("1.23") != std::string::npos);
    CHECK(row.find("50") != std::string::npos);
    CHECK(row.find("75") != std::string::npos);
    CHECK(r.csv_row(false).find("0.00123") != std::string::npos);
  }

  TEST_CASE("two samples of one family are indistinguishable") {
    auto fam = ShapeFamily::defaults(ShapeKind::BoxSurface);
    auto a = synth_dataset(fam, 50, 128, 0.01, 1);
    auto b = synth_dataset(fam, 50, 128, 0.01, 2);
    for (auto& c : a) c = normalize(c).cloud;
    for (auto& c : b) c = normalize(c).cloud;
    const double nna = one_nna(a, b, DistanceKernel{});
    CHECK(nna >= 0.35);
    CHECK(nna <= 0.65);
  }
}
