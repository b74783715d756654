#include "cif/cmaes.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cif/random.hpp"

namespace cif {

std::string to_string(CmaStop stop) {
  switch (stop) {
    case CmaStop::MaxGenerations: return "max_generations";
    case CmaStop::TolFun: return "tol_fun";
    case CmaStop::TolX: return "tol_x";
  }
  return "unknown";
}

CmaResult cma_es_minimize(const Objective& f, std::span<const double> x0, double sigma0, const CmaConfig& config,
                          const std::function<void(const CmaState&)>& on_generation) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const auto n = static_cast<Eigen::Index>(x0.size());
  if (n < 1) throw std::invalid_argument("cma_es: dimension must be at least 1");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw std::invalid_argument("cma_es: sigma0 must be positive");
  for (double v : x0)
    if (!std::isfinite(v)) throw std::invalid_argument("cma_es: x0 must be finite");

  const double nd = static_cast<double>(n);
  const std::size_t lambda =
      config.lambda > 0 ? config.lambda : 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(nd)));
  if (lambda < 2) throw std::invalid_argument("cma_es: lambda must be at least 2");
  const std::size_t mu = lambda / 2;

  VectorXd weights(static_cast<Eigen::Index>(mu));
  for (std::size_t i = 0; i < mu; ++i) {
    weights[static_cast<Eigen::Index>(i)] = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i + 1));
  }
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / nd) / (nd + 4.0 + 2.0 * mueff / nd);
  const double cs = (mueff + 2.0) / (nd + mueff + 5.0);
  const double c1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nd + 2.0) * (nd + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (nd + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));
  const std::size_t flat_window = 10 + static_cast<std::size_t>(std::ceil(30.0 * nd / static_cast<double>(lambda)));

  auto evaluate = [&](const VectorXd& x) {
    const double v = f(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  Rng rng(config.seed);
  VectorXd mean = Eigen::Map<const VectorXd>(x0.data(), n);
  double sigma = sigma0;
  MatrixXd C = MatrixXd::Identity(n, n);
  MatrixXd B = MatrixXd::Identity(n, n);
  VectorXd D = VectorXd::Ones(n);
  VectorXd ps = VectorXd::Zero(n);
  VectorXd pc = VectorXd::Zero(n);

  CmaResult result;
  result.best_x.assign(x0.begin(), x0.end());
  result.best_value = std::numeric_limits<double>::infinity();
  if (config.evaluate_start) {
    result.best_value = evaluate(mean);
    result.evaluations = 1;
  }

  std::vector<VectorXd> xs(lambda), ys(lambda);
  std::vector<double> values(lambda);
  std::vector<std::size_t> order(lambda);
  result.stop = CmaStop::MaxGenerations;

  for (std::size_t gen = 0; gen < config.max_generations; ++gen) {
    for (std::size_t k = 0; k < lambda; ++k) {
      VectorXd z(n);
      for (Eigen::Index i = 0; i < n; ++i) z[i] = standard_normal(rng);
      ys[k] = B * D.asDiagonal() * z;
      xs[k] = mean + sigma * ys[k];
      values[k] = evaluate(xs[k]);
    }
    result.evaluations += lambda;

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    const double gen_best = values[order[0]];
    if (gen_best < result.best_value) {
      result.best_value = gen_best;
      result.best_x.assign(xs[order[0]].data(), xs[order[0]].data() + n);
    }

    VectorXd y_w = VectorXd::Zero(n);
    for (std::size_t i = 0; i < mu; ++i) y_w += weights[static_cast<Eigen::Index>(i)] * ys[order[i]];
    mean += sigma * y_w;

    const VectorXd c_inv_sqrt_yw = B * D.cwiseInverse().asDiagonal() * B.transpose() * y_w;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_yw;
    const double ps_norm = ps.norm();
    const double ps_scale = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(gen + 1)));
    const bool hsig = ps_norm / ps_scale / chi_n < 1.4 + 2.0 / (nd + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    MatrixXd rank_mu = MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < mu; ++i) {
      rank_mu += weights[static_cast<Eigen::Index>(i)] * ys[order[i]] * ys[order[i]].transpose();
    }
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + delta_h * C) + cmu * rank_mu;
    C = (0.5 * (C + C.transpose())).eval();

    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));
    if (!std::isfinite(sigma) || sigma > 1e300) sigma = 1e300;

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(C);
    B = eig.eigenvectors();
    D = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    result.history.push_back({gen + 1, result.best_value, gen_best, sigma});
    if (on_generation) {
      CmaState state;
      state.mean.assign(mean.data(), mean.data() + n);
      state.sigma = sigma;
      state.covariance.resize(static_cast<std::size_t>(n * n));
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) state.covariance[static_cast<std::size_t>(i * n + j)] = C(i, j);
      state.path_sigma.assign(ps.data(), ps.data() + n);
      state.path_c.assign(pc.data(), pc.data() + n);
      state.generation = gen + 1;
      state.lambda = lambda;
      on_generation(state);
    }

    if (sigma * std::sqrt(C.diagonal().maxCoeff()) < config.tol_x) {
      result.stop = CmaStop::TolX;
      break;
    }
    if (result.history.size() >= flat_window) {
      const double spread = values[order.back()] - values[order.front()];
      double lo = gen_best, hi = gen_best;
      for (std::size_t k = result.history.size() - flat_window; k < result.history.size(); ++k) {
        lo = std::min(lo, result.history[k].generation_best);
        hi = std::max(hi, result.history[k].generation_best);
      }
      if (std::isfinite(spread) && spread < config.tol_fun && hi - lo < config.tol_fun) {
        result.stop = CmaStop::TolFun;
        break;
      }
    }
  }
  return result;
}

}  // namespace cif
