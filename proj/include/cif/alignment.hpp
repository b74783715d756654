#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cif/cmaes.hpp"
#include "cif/model.hpp"

namespace cif {

struct AlignConfig {
  std::size_t restarts = 4;
  double sigma0 = 0.5;           // radians
  std::size_t max_generations = 150;
  double tol_x = 1e-4;           // radians
  std::size_t max_points = 512;  // objective subsample; 0 uses every point
  std::uint64_t seed = 0;
};

struct AlignRestart {
  std::array<double, 3> start{};
  std::array<double, 3> angles{};
  double nll = 0.0;
  std::vector<CmaGeneration> history;
};

struct AlignResult {
  std::array<double, 3> angles{};  // axis-angle of R; aligned = cloud rotated by R
  PointCloud aligned;
  double nll = 0.0;          // −log p(R x | e = 0) over the full cloud
  double initial_nll = 0.0;  // same at the identity
  std::vector<AlignRestart> restarts;
};

/// Rows transformed as x ↦ R x.
PointCloud rotate_cloud(const PointCloud& cloud, const std::array<double, 3>& axis_angle);
PointCloud rotate_cloud(const PointCloud& cloud, const Matrix3& rotation);

/// Geodesic angle (radians) between two rotations.
double geodesic_angle(const Matrix3& a, const Matrix3& b);

Matrix3 matmul(const Matrix3& a, const Matrix3& b);
Matrix3 transpose(const Matrix3& a);

/// Axis-angle of a rotation drawn uniformly from SO(3).
std::array<double, 3> random_rotation(Rng& rng);

/// Null-embedding negative log-likelihood of the cloud after rotating by R.
template <typename T>
double pose_nll(const CifModel<T>& model, const PointCloud& cloud, const std::array<double, 3>& axis_angle);

/// Restart 0 starts at the identity, the others at uniform random rotations;
/// the best restart wins.
template <typename T>
AlignResult align_pose(const PointCloud& cloud, const CifModel<T>& model, const AlignConfig& config = {});

}  // namespace cif
