#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cif/tensor.hpp"

// Differentiable primitives. Matrix ops take rank-2 operands; elementwise ops
// accept any rank but require identical shapes (no implicit broadcasting).
// Every op rejects non-finite outputs with NumericError.
namespace cif {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T>
Tensor<T> neg(const Tensor<T>& x);
template <typename T>
Tensor<T> square(const Tensor<T>& x);

template <typename T>
Tensor<T> exp(const Tensor<T>& x);
template <typename T>
Tensor<T> log(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// x (n×in) · weight (in×out) + bias (1×out).
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Sum of every element, as a rank-0 scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Axis reductions on rank-2 tensors keep the reduced axis with extent 1.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis);
/// Gradient flows to the first maximal element along the axis.
template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);
template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, std::size_t axis) {
  return concat(std::span<const Tensor<T>>(parts.begin(), parts.size()), axis);
}
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis, std::span<const std::size_t> sizes);

/// out[:, j] = x[:, columns[j]].
template <typename T>
Tensor<T> gather_cols(const Tensor<T>& x, std::span<const std::size_t> columns);

/// Repeat a 1×d row vector n times into an n×d batch.
template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& v, std::size_t n);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Central-difference check of a scalar function at a point.
/// Returns max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradient_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                      const Tensor<double>& point, double step = 1e-5);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Same check over every coordinate of a set of parameter leaves. The
/// parameters are perturbed in place and restored.
GradCheckReport gradient_check(const std::function<Tensor<double>()>& f,
                               std::span<Tensor<double>> parameters, double step = 1e-5);

}  // namespace cif
