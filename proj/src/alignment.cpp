#include "cif/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cif {

Matrix3 matmul(const Matrix3& a, const Matrix3& b) {
  Matrix3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Matrix3 transpose(const Matrix3& a) {
  Matrix3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i][j] = a[j][i];
  return out;
}

PointCloud rotate_cloud(const PointCloud& cloud, const Matrix3& r) {
  PointCloud out = cloud;
  for (auto& p : out.points) {
    const Point3 q = p;
    for (int i = 0; i < 3; ++i) p[i] = r[i][0] * q[0] + r[i][1] * q[1] + r[i][2] * q[2];
  }
  return out;
}

PointCloud rotate_cloud(const PointCloud& cloud, const std::array<double, 3>& axis_angle) {
  return rotate_cloud(cloud, rotation_matrix(axis_angle));
}

double geodesic_angle(const Matrix3& a, const Matrix3& b) {
  const Matrix3 rel = matmul(transpose(a), b);
  const double c = (rel[0][0] + rel[1][1] + rel[2][2] - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

std::array<double, 3> random_rotation(Rng& rng) {
  const double u1 = uniform(rng, 0.0, 1.0), u2 = uniform(rng, 0.0, 1.0), u3 = uniform(rng, 0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  double x = std::sqrt(1.0 - u1) * std::sin(two_pi * u2);
  double y = std::sqrt(1.0 - u1) * std::cos(two_pi * u2);
  double z = std::sqrt(u1) * std::sin(two_pi * u3);
  double w = std::sqrt(u1) * std::cos(two_pi * u3);
  if (w < 0.0) x = -x, y = -y, z = -z, w = -w;
  const double s = std::sqrt(x * x + y * y + z * z);
  if (s < 1e-12) return {0.0, 0.0, 0.0};
  const double angle = 2.0 * std::atan2(s, w);
  return {x / s * angle, y / s * angle, z / s * angle};
}

template <typename T>
double pose_nll(const CifModel<T>& model, const PointCloud& cloud, const std::array<double, 3>& axis_angle) {
  typename Tape<T>::Suspend no_grad;
  const RotationLayer rotation(axis_angle);
  Tensor<T> x = rotation.forward(to_tensor<T>(cloud));
  return -static_cast<double>(model.point_loglik(x, model.null_embedding()).total.item());
}

template <typename T>
AlignResult align_pose(const PointCloud& cloud, const CifModel<T>& model, const AlignConfig& config) {
  if (cloud.empty()) throw DataError("align_pose: cloud '" + cloud.id + "' is empty");
  if (config.restarts == 0) throw std::invalid_argument("align_pose: restarts must be at least 1");

  Rng rng(config.seed);
  PointCloud subset = cloud;
  if (config.max_points > 0 && cloud.size() > config.max_points) {
    subset = split_fh(cloud, config.max_points, 1, rng).xf;
  }

  auto objective = [&](std::span<const double> a) {
    try {
      return pose_nll(model, subset, {a[0], a[1], a[2]});
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  AlignResult result;
  result.initial_nll = pose_nll(model, cloud, {0.0, 0.0, 0.0});
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < config.restarts; ++r) {
    AlignRestart restart;
    restart.start = r == 0 ? std::array<double, 3>{0.0, 0.0, 0.0} : random_rotation(rng);
    CmaConfig cma;
    cma.max_generations = config.max_generations;
    cma.tol_fun = 1e-6;
    cma.tol_x = config.tol_x;
    cma.seed = config.seed * 1000003ULL + r;
    CmaResult found = cma_es_minimize(objective, restart.start, config.sigma0, cma);
    restart.angles = {found.best_x[0], found.best_x[1], found.best_x[2]};
    restart.nll = found.best_value;
    restart.history = std::move(found.history);
    if (restart.nll < best) {
      best = restart.nll;
      result.angles = restart.angles;
    }
    result.restarts.push_back(std::move(restart));
  }

  result.nll = pose_nll(model, cloud, result.angles);
  if (!(result.nll <= result.initial_nll)) {
    result.angles = {0.0, 0.0, 0.0};
    result.nll = result.initial_nll;
  }
  result.aligned = rotate_cloud(cloud, result.angles);
  result.aligned.id = cloud.id + "_aligned";
  return result;
}

template double pose_nll<float>(const CifModel<float>&, const PointCloud&, const std::array<double, 3>&);
template double pose_nll<double>(const CifModel<double>&, const PointCloud&, const std::array<double, 3>&);
template AlignResult align_pose<float>(const PointCloud&, const CifModel<float>&, const AlignConfig&);
template AlignResult align_pose<double>(const PointCloud&, const CifModel<double>&, const AlignConfig&);

}  // namespace cif
