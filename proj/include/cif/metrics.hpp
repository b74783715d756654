#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cif/dataset.hpp"

namespace cif {

/// Minimum-cost perfect matching on an n×n row-major cost matrix.
/// Returns col[i] for every row i.
std::vector<std::size_t> solve_assignment(const std::vector<double>& cost, std::size_t n);

/// Mean nearest-neighbour (squared, by default) distance in both directions, summed.
double chamfer(const PointCloud& a, const PointCloud& b, bool squared = true);

/// Optimal-bijection Euclidean cost, divided by N unless `mean` is false.
double emd(const PointCloud& a, const PointCloud& b, std::size_t exact_threshold = 1024, bool mean = true);

enum class DistanceKind { Chamfer, Emd };

struct DistanceKernel {
  DistanceKind kind = DistanceKind::Chamfer;
  std::size_t emd_exact_threshold = 1024;
  bool chamfer_squared = true;
  bool emd_mean = true;

  double operator()(const PointCloud& a, const PointCloud& b) const;
  std::string name() const;
};

/// |a|×|b| row-major matrix of kernel distances.
std::vector<double> distance_matrix(const std::vector<PointCloud>& a, const std::vector<PointCloud>& b,
                                    const DistanceKernel& kernel);

struct JsdConfig {
  std::size_t resolution = 28;
  double bound = 1.0;  // grid spans [-bound, bound]^3
};

struct JsdResult {
  double value = 0.0;  // nats
  std::size_t clipped_gen = 0;
  std::size_t clipped_ref = 0;
};

/// Occupancy histogram of every point in the corpus; out-of-grid points land in
/// the nearest boundary voxel. Returns the clipped count through `clipped`.
std::vector<double> voxel_histogram(const std::vector<PointCloud>& corpus, const JsdConfig& config,
                                    std::size_t* clipped = nullptr);

JsdResult jsd(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const JsdConfig& config = {});

struct MmdCov {
  double mmd = 0.0;
  double cov = 0.0;
};

MmdCov mmd_cov(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const DistanceKernel& kernel);
/// From a |gen|×|ref| distance matrix.
MmdCov mmd_cov_from_matrix(const std::vector<double>& gen_ref, std::size_t n_gen, std::size_t n_ref);

double one_nna(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref, const DistanceKernel& kernel);
/// Pooled order: gen first, then ref. Matrices are gen×gen, gen×ref, ref×ref.
double one_nna_from_matrices(const std::vector<double>& gen_gen, const std::vector<double>& gen_ref,
                             const std::vector<double>& ref_ref, std::size_t n_gen, std::size_t n_ref);

struct MetricsReport {
  std::optional<double> jsd;
  std::optional<double> mmd_cd, mmd_emd;
  std::optional<double> cov_cd, cov_emd;
  std::optional<double> nna_cd, nna_emd;
  std::size_t n_gen = 0;
  std::size_t n_ref = 0;
  bool chamfer_squared = true;
  bool emd_mean = true;
  std::size_t emd_exact_threshold = 1024;
  JsdConfig jsd_config;
  std::size_t jsd_clipped_gen = 0;
  std::size_t jsd_clipped_ref = 0;

  /// "key value" lines at full precision.
  std::string key_values() const;
  std::string csv_header() const;
  /// With `table`, MMD-CD ×10³, MMD-EMD ×10², COV and 1-NNA in percent.
  std::string csv_row(bool table = false) const;
};

struct EvalOptions {
  bool chamfer = true;
  bool emd = true;
  DistanceKernel base;
  JsdConfig jsd;
};

MetricsReport evaluate(const std::vector<PointCloud>& gen, const std::vector<PointCloud>& ref,
                       const EvalOptions& options = {});

}  // namespace cif
