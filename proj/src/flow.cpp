#include "cif/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace cif {

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out)
    : weight_(Tensor<T>::zeros({in, out}, true)), bias_(Tensor<T>::zeros({1, out}, true)) {}

template <typename T>
void Linear<T>::init_uniform(Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(in_dim()));
  for (auto& w : weight_.mutable_data()) w = static_cast<T>(uniform(rng, -bound, bound));
  for (auto& b : bias_.mutable_data()) b = T(0);
}

template <typename T>
void Linear<T>::init_normal(Rng& rng, double stddev) {
  for (auto& w : weight_.mutable_data()) w = static_cast<T>(stddev * standard_normal(rng));
  for (auto& b : bias_.mutable_data()) b = T(0);
}

template <typename T>
void Linear<T>::init_zero() {
  for (auto& w : weight_.mutable_data()) w = T(0);
  for (auto& b : bias_.mutable_data()) b = T(0);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

template <typename T>
ResidualNet<T>::ResidualNet(std::size_t in, std::size_t hidden, std::size_t out, std::size_t blocks, Rng& rng,
                            bool zero_output)
    : input_(in, hidden), output_(hidden, out) {
  input_.init_uniform(rng);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::array<Linear<T>, 2> block{Linear<T>(hidden, hidden), Linear<T>(hidden, hidden)};
    block[0].init_uniform(rng);
    block[1].init_uniform(rng);
    blocks_.push_back(std::move(block));
  }
  if (zero_output) {
    output_.init_zero();
  } else {
    output_.init_uniform(rng);
  }
}

template <typename T>
Tensor<T> ResidualNet<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> h = tanh(input_(x));
  for (const auto& block : blocks_) h = add(h, block[1](tanh(block[0](h))));
  return output_(h);
}

template <typename T>
void ResidualNet<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  input_.collect(prefix + ".in", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b][0].collect(prefix + ".res" + std::to_string(b) + ".a", out);
    blocks_[b][1].collect(prefix + ".res" + std::to_string(b) + ".b", out);
  }
  output_.collect(prefix + ".out", out);
}

template <typename T>
CouplingLayer<T>::CouplingLayer(std::vector<std::size_t> first, std::vector<std::size_t> second,
                                std::size_t conditioning_dim, std::size_t hidden, std::size_t residual_blocks,
                                double scale_clamp, Rng& rng, bool zero_output)
    : first_(std::move(first)),
      second_(std::move(second)),
      conditioning_dim_(conditioning_dim),
      scale_clamp_(scale_clamp) {
  if (first_.empty() || second_.empty()) throw std::invalid_argument("coupling: both partitions must be nonempty");
  if (!(scale_clamp > 0.0)) throw std::invalid_argument("coupling: scale clamp must be positive");
  const std::size_t d = first_.size() + second_.size();
  std::vector<std::size_t> order = first_;
  order.insert(order.end(), second_.begin(), second_.end());
  std::vector<bool> seen(d, false);
  for (auto c : order) {
    if (c >= d || seen[c]) throw std::invalid_argument("coupling: partition must split 0..d-1 into disjoint sets");
    seen[c] = true;
  }
  order_inverse_.assign(d, 0);
  for (std::size_t k = 0; k < d; ++k) order_inverse_[order[k]] = k;
  natural_order_ = std::is_sorted(order.begin(), order.end());

  const std::size_t in = first_.size() + conditioning_dim_;
  scale_net_ = ResidualNet<T>(in, hidden, second_.size(), residual_blocks, rng, zero_output);
  shift_net_ = ResidualNet<T>(in, hidden, second_.size(), residual_blocks, rng, zero_output);
}

template <typename T>
typename CouplingLayer<T>::ScaleShift CouplingLayer<T>::scale_shift(const Tensor<T>& y1, const Tensor<T>& e) const {
  Tensor<T> h = y1;
  if (conditioning_dim_ > 0) {
    if (!e.defined() || e.rank() != 2 || e.rows() != 1 || e.cols() != conditioning_dim_) {
      throw ShapeError("coupling: conditioning must be 1x" + std::to_string(conditioning_dim_) + ", got " +
                       (e.defined() ? shape_str(e.shape()) : std::string("<none>")));
    }
    h = concat({y1, broadcast_rows(e, y1.rows())}, 1);
  } else if (e.defined() && e.size() != 0) {
    throw ShapeError("coupling: unconditional layer given conditioning of shape " + shape_str(e.shape()));
  }
  return {scale(tanh(scale_net_(h)), static_cast<T>(scale_clamp_)), shift_net_(h)};
}

template <typename T>
Tensor<T> CouplingLayer<T>::assemble(const Tensor<T>& a, const Tensor<T>& b) const {
  Tensor<T> joined = concat({a, b}, 1);
  if (natural_order_) return joined;
  return gather_cols(joined, std::span<const std::size_t>(order_inverse_));
}

template <typename T>
FlowOutput<T> CouplingLayer<T>::forward(const Tensor<T>& y, const Tensor<T>& e) const {
  if (y.rank() != 2 || y.cols() != dim()) {
    throw ShapeError("coupling: expected n x " + std::to_string(dim()) + " input, got " + shape_str(y.shape()));
  }
  Tensor<T> y1 = gather_cols(y, std::span<const std::size_t>(first_));
  Tensor<T> y2 = gather_cols(y, std::span<const std::size_t>(second_));
  auto [s, t] = scale_shift(y1, e);
  Tensor<T> z2 = add(mul(y2, exp(s)), t);
  return {assemble(y1, z2), reduce_sum(s, 1)};
}

template <typename T>
Tensor<T> CouplingLayer<T>::inverse(const Tensor<T>& z, const Tensor<T>& e) const {
  if (z.rank() != 2 || z.cols() != dim()) {
    throw ShapeError("coupling: expected n x " + std::to_string(dim()) + " input, got " + shape_str(z.shape()));
  }
  Tensor<T> z1 = gather_cols(z, std::span<const std::size_t>(first_));
  Tensor<T> z2 = gather_cols(z, std::span<const std::size_t>(second_));
  auto [s, t] = scale_shift(z1, e);
  Tensor<T> y2 = mul(sub(z2, t), exp(neg(s)));
  return assemble(z1, y2);
}

template <typename T>
void CouplingLayer<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  scale_net_.collect(prefix + ".scale", out);
  shift_net_.collect(prefix + ".shift", out);
}

PermutationLayer::PermutationLayer(std::vector<std::size_t> perm) : perm_(std::move(perm)) {
  inverse_.assign(perm_.size(), perm_.size());
  for (std::size_t j = 0; j < perm_.size(); ++j) {
    if (perm_[j] >= perm_.size() || inverse_[perm_[j]] != perm_.size()) {
      throw std::invalid_argument("permutation layer: not a permutation");
    }
    inverse_[perm_[j]] = j;
  }
}

PermutationLayer PermutationLayer::random(std::size_t dim, Rng& rng) {
  std::vector<std::size_t> perm(dim);
  for (;;) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = dim; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i - 1], perm[pick(rng)]);
    }
    if (dim < 2 || !std::is_sorted(perm.begin(), perm.end())) break;
  }
  return PermutationLayer(std::move(perm));
}

Matrix3 rotation_matrix(const std::array<double, 3>& a) {
  const double theta = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  Matrix3 r{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  if (theta == 0.0) return r;
  const double k[3] = {a[0] / theta, a[1] / theta, a[2] / theta};
  const double s = std::sin(theta), c = 1.0 - std::cos(theta);
  // R = I + sinθ K + (1 − cosθ) K², K = [k]×
  const double kx[3][3] = {{0, -k[2], k[1]}, {k[2], 0, -k[0]}, {-k[1], k[0], 0}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double k2 = 0.0;
      for (int m = 0; m < 3; ++m) k2 += kx[i][m] * kx[m][j];
      r[i][j] += s * kx[i][j] + c * k2;
    }
  }
  return r;
}

namespace {

template <typename T>
Tensor<T> rotate_rows(const Tensor<T>& x, const Matrix3& m, bool transpose) {
  if (x.rank() != 2 || x.cols() != 3) throw ShapeError("rotation: expected n x 3 points, got " + shape_str(x.shape()));
  std::vector<T> mt(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) mt[i * 3 + j] = static_cast<T>(transpose ? m[j][i] : m[i][j]);
  return matmul(x, Tensor<T>::constant({3, 3}, std::move(mt)));
}

}  // namespace

template <typename T>
Tensor<T> RotationLayer::forward(const Tensor<T>& x) const {
  return rotate_rows(x, matrix(), true);
}

template <typename T>
Tensor<T> RotationLayer::inverse(const Tensor<T>& x) const {
  return rotate_rows(x, matrix(), false);
}

template Tensor<float> RotationLayer::forward(const Tensor<float>&) const;
template Tensor<double> RotationLayer::forward(const Tensor<double>&) const;
template Tensor<float> RotationLayer::inverse(const Tensor<float>&) const;
template Tensor<double> RotationLayer::inverse(const Tensor<double>&) const;

template <typename T>
FlowStack<T> FlowStack<T>::build(const FlowArch& arch, Rng& rng) {
  if (arch.dim < 2) throw std::invalid_argument("flow: dimension must be at least 2");
  FlowStack<T> stack(arch.dim, arch.conditioning_dim);
  stack.segments_ = arch.segments;
  stack.blocks_ = arch.blocks;
  const std::size_t d = arch.dim;
  for (std::size_t i = 0; i < arch.segments * arch.blocks; ++i) {
    const std::size_t d1 = (i % 2 == 0) ? d / 2 : d - d / 2;
    std::vector<std::size_t> first(d1), second(d - d1);
    std::iota(first.begin(), first.end(), std::size_t{0});
    std::iota(second.begin(), second.end(), d1);
    stack.push(CouplingLayer<T>(std::move(first), std::move(second), arch.conditioning_dim, arch.hidden,
                                arch.residual_blocks, arch.scale_clamp, rng, arch.zero_init));
    stack.push(PermutationLayer::random(d, rng));
  }
  return stack;
}

template <typename T>
void FlowStack<T>::push(FlowLayer<T> layer) {
  std::size_t d = std::visit([](const auto& l) -> std::size_t {
    if constexpr (std::is_same_v<std::decay_t<decltype(l)>, RotationLayer>) {
      return 3;
    } else {
      return l.dim();
    }
  }, layer);
  if (d != dim_) throw ShapeError("flow: layer of dimension " + std::to_string(d) + " in a " + std::to_string(dim_) + "-D stack");
  if (auto* c = std::get_if<CouplingLayer<T>>(&layer); c && c->conditioning_dim() != conditioning_dim_) {
    throw ShapeError("flow: coupling conditioning dimension does not match the stack");
  }
  layers_.push_back(std::move(layer));
}

template <typename T>
void FlowStack<T>::check_input(const char* what, const Tensor<T>& x, const Tensor<T>& e) const {
  if (!x.defined() || x.rank() != 2 || x.cols() != dim_) {
    throw ShapeError(std::string("flow ") + what + ": expected n x " + std::to_string(dim_) + " input, got " +
                     (x.defined() ? shape_str(x.shape()) : std::string("<none>")));
  }
  if (conditioning_dim_ > 0 && (!e.defined() || e.rank() != 2 || e.rows() != 1 || e.cols() != conditioning_dim_)) {
    throw ShapeError(std::string("flow ") + what + ": conditioning must be 1x" + std::to_string(conditioning_dim_) +
                     ", got " + (e.defined() ? shape_str(e.shape()) : std::string("<none>")));
  }
}

namespace {

template <typename T>
const char* layer_kind(const FlowLayer<T>& layer) {
  switch (layer.index()) {
    case 0: return "coupling";
    case 1: return "permutation";
    default: return "rotation";
  }
}

}  // namespace

template <typename T>
FlowOutput<T> FlowStack<T>::forward(const Tensor<T>& x, const Tensor<T>& e) const {
  check_input("forward", x, e);
  Tensor<T> value = x;
  Tensor<T> logdet = Tensor<T>::zeros({x.rows(), 1});
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    try {
      if (const auto* c = std::get_if<CouplingLayer<T>>(&layer)) {
        auto out = c->forward(value, e);
        value = std::move(out.value);
        logdet = add(logdet, out.logdet);
      } else if (const auto* p = std::get_if<PermutationLayer>(&layer)) {
        value = p->forward(value);
      } else {
        value = std::get<RotationLayer>(layer).forward(value);
      }
    } catch (const NumericError& err) {
      throw NumericError("flow layer " + std::to_string(k) + " (" + layer_kind(layer) + "): " + err.what());
    }
  }
  return {value, logdet};
}

template <typename T>
Tensor<T> FlowStack<T>::inverse(const Tensor<T>& z, const Tensor<T>& e) const {
  check_input("inverse", z, e);
  Tensor<T> value = z;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& layer = layers_[k];
    try {
      if (const auto* c = std::get_if<CouplingLayer<T>>(&layer)) {
        value = c->inverse(value, e);
      } else if (const auto* p = std::get_if<PermutationLayer>(&layer)) {
        value = p->inverse(value);
      } else {
        value = std::get<RotationLayer>(layer).inverse(value);
      }
    } catch (const NumericError& err) {
      throw NumericError("flow layer " + std::to_string(k) + " (" + layer_kind(layer) + ", inverse): " + err.what());
    }
  }
  return value;
}

template <typename T>
std::vector<NamedParameter<T>> FlowStack<T>::parameters(const std::string& prefix) const {
  std::vector<NamedParameter<T>> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (const auto* c = std::get_if<CouplingLayer<T>>(&layers_[k])) c->collect(prefix + ".layer" + std::to_string(k), out);
  }
  return out;
}

template <typename T>
Tensor<T> standard_normal_logpdf(const Tensor<T>& v) {
  const double d = static_cast<double>(v.cols());
  const T norm = static_cast<T>(-0.5 * d * std::log(2.0 * std::numbers::pi));
  return add_scalar(scale(reduce_sum(square(v), 1), T(-0.5)), norm);
}

template class Linear<float>;
template class Linear<double>;
template class ResidualNet<float>;
template class ResidualNet<double>;
template class CouplingLayer<float>;
template class CouplingLayer<double>;
template class FlowStack<float>;
template class FlowStack<double>;
template Tensor<float> standard_normal_logpdf(const Tensor<float>&);
template Tensor<double> standard_normal_logpdf(const Tensor<double>&);

}  // namespace cif
