#include "cif/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kernels.hpp"

namespace cif {

namespace {

template <typename T>
using Node = detail::Node<T>;

template <typename T>
using GradIn = std::vector<std::vector<T>>;

template <typename T>
void check_finite(const char* op, const std::vector<T>& value, const Shape& shape) {
  for (T v : value) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("op '") + op + "' produced a non-finite value (output shape " +
                         shape_str(shape) + ")");
    }
  }
}

template <typename T, typename F>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::span<const Tensor<T>> inputs, F&& backward) {
  check_finite(op, value, shape);
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  if (Tape<T>* tape = Tape<T>::active()) {
    bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::forward<F>(backward);
      tape->record(node);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T, typename F>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::initializer_list<Tensor<T>> inputs, F&& backward) {
  return make_result<T>(op, std::move(shape), std::move(value),
                        std::span<const Tensor<T>>(inputs.begin(), inputs.size()), std::forward<F>(backward));
}

template <typename T>
void require_defined(const char* op, const Tensor<T>& t) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": undefined operand");
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_rank2(const char* op, const Tensor<T>& a) {
  require_defined(op, a);
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got " + shape_str(a.shape()));
}

/// Elementwise unary op; dfn(x, y) is the local derivative.
template <typename T, typename Fwd, typename Dfn>
Tensor<T> unary(const char* op, const Tensor<T>& x, Fwd fwd, Dfn dfn) {
  require_defined(op, x);
  auto in = x.data();
  std::vector<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result<T>(op, x.shape(), std::move(out), {x},
                        [dfn](const Node<T>& self, std::span<const T> g, GradIn<T>& gin) {
                          auto& gx = gin[0];
                          const auto& xv = self.inputs[0]->value;
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dfn(xv[i], self.value[i]);
                        });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<T> out(m * n, T(0));
  kernels::gemm_nn_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result<T>("matmul", {m, n}, std::move(out), {a, b},
                        [m, k, n](const Node<T>& self, std::span<const T> g, GradIn<T>& gin) {
                          const auto& av = self.inputs[0]->value;
                          const auto& bv = self.inputs[1]->value;
                          if (!gin[0].empty()) kernels::gemm_nt_acc(g.data(), bv.data(), gin[0].data(), m, n, k);
                          if (!gin[1].empty()) kernels::gemm_tn_acc(av.data(), g.data(), gin[1].data(), m, k, n);
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b},
                        [](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (auto& gx : gin) {
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                          }
                        });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b},
                        [](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                          for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] -= g[i];
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  auto av = a.data(), bv = b.data();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b},
                        [](const Node<T>& self, std::span<const T> g, GradIn<T>& gin) {
                          const auto& av = self.inputs[0]->value;
                          const auto& bv = self.inputs[1]->value;
                          for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] * bv[i];
                          for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] += g[i] * av[i];
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary<T>("scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  return unary<T>("add_scalar", x, [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary<T>("neg", x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank2("affine", x);
  require_rank2("affine", weight);
  require_defined("affine", bias);
  const std::size_t m = x.rows(), k = x.cols(), n = weight.cols();
  if (weight.rows() != k) {
    throw ShapeError("affine: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.size() != n || bias.rows() != 1) {
    throw ShapeError("affine: weight " + shape_str(weight.shape()) + " vs bias " + shape_str(bias.shape()));
  }
  std::vector<T> out(m * n);
  auto bv = bias.data();
  for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  kernels::gemm_nn_acc(x.data().data(), weight.data().data(), out.data(), m, k, n);
  return make_result<T>("affine", {m, n}, std::move(out), {x, weight, bias},
                        [m, k, n](const Node<T>& self, std::span<const T> g, GradIn<T>& gin) {
                          const auto& xv = self.inputs[0]->value;
                          const auto& wv = self.inputs[1]->value;
                          if (!gin[0].empty()) kernels::gemm_nt_acc(g.data(), wv.data(), gin[0].data(), m, n, k);
                          if (!gin[1].empty()) kernels::gemm_tn_acc(xv.data(), g.data(), gin[1].data(), m, k, n);
                          if (!gin[2].empty()) {
                            auto& gb = gin[2];
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                          }
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  require_defined("sum", x);
  T total = T(0);
  for (T v : x.data()) total += v;
  return make_result<T>("sum", Shape{}, std::vector<T>{total}, {x},
                        [](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (auto& v : gin[0]) v += g[0];
                        });
}

namespace {

template <typename T>
void check_axis(const char* op, const Tensor<T>& x, std::size_t axis) {
  require_rank2(op, x);
  if (axis > 1) throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
}

template <typename T>
Tensor<T> reduce_sum_scaled(const char* op, const Tensor<T>& x, std::size_t axis, T factor) {
  check_axis(op, x, axis);
  const std::size_t r = x.rows(), c = x.cols();
  auto xv = x.data();
  Shape shape = axis == 0 ? Shape{1, c} : Shape{r, 1};
  std::vector<T> out(axis == 0 ? c : r, T(0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += xv[i * c + j];
  if (factor != T(1)) {
    for (auto& v : out) v *= factor;
  }
  return make_result<T>(op, std::move(shape), std::move(out), {x},
                        [r, c, axis, factor](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          auto& gx = gin[0];
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[axis == 0 ? j : i] * factor;
                        });
}

}  // namespace

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::size_t axis) {
  return reduce_sum_scaled<T>("reduce_sum", x, axis, T(1));
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis) {
  check_axis("reduce_mean", x, axis);
  const std::size_t count = axis == 0 ? x.rows() : x.cols();
  if (count == 0) throw ShapeError("reduce_mean: empty axis");
  return reduce_sum_scaled<T>("reduce_mean", x, axis, T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis) {
  check_axis("reduce_max", x, axis);
  const std::size_t r = x.rows(), c = x.cols();
  if (r == 0 || c == 0) throw ShapeError("reduce_max: empty tensor " + shape_str(x.shape()));
  auto xv = x.data();
  const std::size_t outer = axis == 0 ? c : r;
  const std::size_t inner = axis == 0 ? r : c;
  std::vector<T> out(outer);
  std::vector<std::size_t> argmax(outer);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t best = axis == 0 ? o : o * c;
    for (std::size_t t = 1; t < inner; ++t) {
      std::size_t idx = axis == 0 ? t * c + o : o * c + t;
      if (xv[idx] > xv[best]) best = idx;
    }
    argmax[o] = best;
    out[o] = xv[best];
  }
  Shape shape = axis == 0 ? Shape{1, c} : Shape{r, 1};
  return make_result<T>("reduce_max", std::move(shape), std::move(out), {x},
                        [argmax = std::move(argmax)](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (std::size_t o = 0; o < argmax.size(); ++o) gin[0][argmax[o]] += g[o];
                        });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  for (const auto& p : parts) check_axis("concat", p, axis);
  const std::size_t other = axis == 0 ? parts[0].cols() : parts[0].rows();
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t o = axis == 0 ? p.cols() : p.rows();
    if (o != other) {
      throw ShapeError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    extents.push_back(axis == 0 ? p.rows() : p.cols());
    total += extents.back();
  }
  const std::size_t r = axis == 0 ? total : other;
  const std::size_t c = axis == 0 ? other : total;
  std::vector<T> out(r * c);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pv = parts[k].data();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + offset * c);
    } else {
      const std::size_t pc = extents[k];
      for (std::size_t i = 0; i < r; ++i)
        std::copy(pv.begin() + i * pc, pv.begin() + (i + 1) * pc, out.begin() + i * c + offset);
    }
    offset += extents[k];
  }
  return make_result<T>("concat", {r, c}, std::move(out), parts,
                        [extents = std::move(extents), axis, r, c](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          std::size_t offset = 0;
                          for (std::size_t k = 0; k < extents.size(); ++k) {
                            auto& gk = gin[k];
                            if (!gk.empty()) {
                              if (axis == 0) {
                                for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offset * c + i];
                              } else {
                                const std::size_t pc = extents[k];
                                for (std::size_t i = 0; i < r; ++i)
                                  for (std::size_t j = 0; j < pc; ++j) gk[i * pc + j] += g[i * c + offset + j];
                              }
                            }
                            offset += extents[k];
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  check_axis("slice", x, axis);
  const std::size_t r = x.rows(), c = x.cols();
  const std::size_t extent = axis == 0 ? r : c;
  if (begin > end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of bounds for " +
                     shape_str(x.shape()));
  }
  const std::size_t orow = axis == 0 ? end - begin : r;
  const std::size_t ocol = axis == 0 ? c : end - begin;
  auto xv = x.data();
  std::vector<T> out(orow * ocol);
  for (std::size_t i = 0; i < orow; ++i)
    for (std::size_t j = 0; j < ocol; ++j)
      out[i * ocol + j] = axis == 0 ? xv[(i + begin) * c + j] : xv[i * c + j + begin];
  return make_result<T>("slice", {orow, ocol}, std::move(out), {x},
                        [=](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          auto& gx = gin[0];
                          for (std::size_t i = 0; i < orow; ++i)
                            for (std::size_t j = 0; j < ocol; ++j) {
                              std::size_t idx = axis == 0 ? (i + begin) * c + j : i * c + j + begin;
                              gx[idx] += g[i * ocol + j];
                            }
                        });
}

template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& x, std::size_t axis, std::span<const std::size_t> sizes) {
  check_axis("split", x, axis);
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) != extent) {
    throw ShapeError("split: sizes do not add up to axis extent of " + shape_str(x.shape()));
  }
  std::vector<Tensor<T>> out;
  std::size_t begin = 0;
  for (auto s : sizes) {
    out.push_back(slice(x, axis, begin, begin + s));
    begin += s;
  }
  return out;
}

template <typename T>
Tensor<T> gather_cols(const Tensor<T>& x, std::span<const std::size_t> columns) {
  require_rank2("gather_cols", x);
  const std::size_t r = x.rows(), c = x.cols(), n = columns.size();
  for (auto col : columns) {
    if (col >= c) throw ShapeError("gather_cols: column " + std::to_string(col) + " out of range for " + shape_str(x.shape()));
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  auto xv = x.data();
  std::vector<T> out(r * n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * c + cols[j]];
  return make_result<T>("gather_cols", {r, n}, std::move(out), {x},
                        [cols = std::move(cols), r, c](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          const std::size_t n = cols.size();
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < n; ++j) gin[0][i * c + cols[j]] += g[i * n + j];
                        });
}

template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& v, std::size_t n) {
  require_rank2("broadcast_rows", v);
  if (v.rows() != 1) throw ShapeError("broadcast_rows: expected a 1×d row, got " + shape_str(v.shape()));
  const std::size_t d = v.cols();
  auto vv = v.data();
  std::vector<T> out(n * d);
  for (std::size_t i = 0; i < n; ++i) std::copy(vv.begin(), vv.end(), out.begin() + i * d);
  return make_result<T>("broadcast_rows", {n, d}, std::move(out), {v},
                        [n, d](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < d; ++j) gin[0][j] += g[i * d + j];
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require_defined("reshape", x);
  if (shape_size(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xv = x.data();
  return make_result<T>("reshape", std::move(shape), std::vector<T>(xv.begin(), xv.end()), {x},
                        [](const Node<T>&, std::span<const T> g, GradIn<T>& gin) {
                          for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                        });
}

namespace {

double rel_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
  return std::abs(a - n) / denom;
}

double eval_scalar(const std::function<Tensor<double>()>& f) {
  Tensor<double> y = f();
  double v = y.item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite function value");
  return v;
}

}  // namespace

double gradient_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, const Tensor<double>& point,
                      double step) {
  Tensor<double> x = Tensor<double>::parameter(point.shape(), std::vector<double>(point.data().begin(), point.data().end()));
  std::vector<Tensor<double>> params{x};
  return gradient_check([&] { return f(x); }, params, step).max_rel_error;
}

GradCheckReport gradient_check(const std::function<Tensor<double>()>& f, std::span<Tensor<double>> parameters,
                               double step) {
  if (!(step > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    Tape<double>::Scope scope(tape);
    Tensor<double> y = f();
    if (y.size() != 1) throw ShapeError("gradient_check: function must return a scalar, got " + shape_str(y.shape()));
    if (!std::isfinite(y.item())) throw NumericError("gradient_check: non-finite function value");
    Gradients<double> grads = tape.empty() ? Gradients<double>{} : tape.backward(y);
    for (const auto& p : parameters) analytic.push_back(grads.of(p));
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < parameters.size(); ++pi) {
    auto data = parameters[pi].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double a = analytic[pi][i];
      if (!std::isfinite(a)) throw NumericError("gradient_check: non-finite analytic gradient");
      const double saved = data[i];
      data[i] = saved + step;
      const double up = eval_scalar(f);
      data[i] = saved - step;
      const double down = eval_scalar(f);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      if (!std::isfinite(numeric)) throw NumericError("gradient_check: non-finite numeric gradient");
      const double err = rel_error(a, numeric);
      ++report.coordinates;
      if (report.coordinates == 1 || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = pi;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

#define CIF_INSTANTIATE_OPS(T)                                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                \
  template Tensor<T> neg(const Tensor<T>&);                                                          \
  template Tensor<T> square(const Tensor<T>&);                                                       \
  template Tensor<T> exp(const Tensor<T>&);                                                          \
  template Tensor<T> log(const Tensor<T>&);                                                          \
  template Tensor<T> tanh(const Tensor<T>&);                                                         \
  template Tensor<T> relu(const Tensor<T>&);                                                         \
  template Tensor<T> affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> reduce_sum(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> reduce_mean(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> reduce_max(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                                \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                 \
  template std::vector<Tensor<T>> split(const Tensor<T>&, std::size_t, std::span<const std::size_t>); \
  template Tensor<T> gather_cols(const Tensor<T>&, std::span<const std::size_t>);                    \
  template Tensor<T> broadcast_rows(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);

CIF_INSTANTIATE_OPS(float)
CIF_INSTANTIATE_OPS(double)

#undef CIF_INSTANTIATE_OPS

}  // namespace cif
