#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cif/model.hpp"
#include "cif/ops.hpp"
#include "cif/random.hpp"

namespace testing {

using cif::Rng;
using cif::Tensor;

template <typename T>
Tensor<T> random_tensor(cif::Shape shape, Rng& rng, double scale = 1.0, bool param = false) {
  std::vector<T> data(cif::shape_size(shape));
  for (auto& v : data) v = static_cast<T>(scale * cif::standard_normal(rng));
  return param ? Tensor<T>::parameter(std::move(shape), std::move(data))
               : Tensor<T>::constant(std::move(shape), std::move(data));
}

/// Central differences of f at x, written independently of the library check.
inline std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = x[i];
    x[i] = s + h;
    const double up = f(x);
    x[i] = s - h;
    const double down = f(x);
    x[i] = s;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-6}));
  }
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline cif::PointCloud random_cloud(std::size_t n, Rng& rng, double scale = 1.0) {
  cif::PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({scale * cif::standard_normal(rng), scale * cif::standard_normal(rng),
                        scale * cif::standard_normal(rng)});
  return c;
}

}  // namespace testing
