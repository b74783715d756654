#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cif {

struct CmaConfig {
  std::size_t lambda = 0;  // 0: 4 + floor(3 ln n)
  std::size_t max_generations = 1000;
  double tol_fun = 1e-12;  // stop when recent best values span less than this
  double tol_x = 1e-12;    // stop when sigma * max coordinate std falls below this
  std::uint64_t seed = 0;
  bool evaluate_start = true;  // seed best-so-far with f(x0)
};

/// Full optimizer state after a generation.
struct CmaState {
  std::vector<double> mean;
  double sigma = 0.0;
  std::vector<double> covariance;  // n×n row-major
  std::vector<double> path_sigma;
  std::vector<double> path_c;
  std::size_t generation = 0;
  std::size_t lambda = 0;
};

struct CmaGeneration {
  std::size_t generation = 0;
  double best_value = 0.0;        // best so far
  double generation_best = 0.0;   // best of this generation
  double sigma = 0.0;
};

enum class CmaStop { MaxGenerations, TolFun, TolX };

std::string to_string(CmaStop stop);

struct CmaResult {
  std::vector<double> best_x;
  double best_value = 0.0;
  std::vector<CmaGeneration> history;
  std::size_t evaluations = 0;
  CmaStop stop = CmaStop::MaxGenerations;
};

using Objective = std::function<double(std::span<const double>)>;

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates.
/// Non-finite objective values rank as +inf.
CmaResult cma_es_minimize(const Objective& f, std::span<const double> x0, double sigma0, const CmaConfig& config = {},
                          const std::function<void(const CmaState&)>& on_generation = {});

}  // namespace cif
