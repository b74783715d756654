#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "cif/ops.hpp"
#include "cif/random.hpp"
#include "cif/tensor.hpp"

namespace cif {

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

/// Fully connected layer; weight is in×out, bias 1×out.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out);

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) weights and zero bias, or all zeros.
  void init_uniform(Rng& rng, double gain = 1.0);
  void init_normal(Rng& rng, double stddev);
  void init_zero();

  Tensor<T> operator()(const Tensor<T>& x) const { return affine(x, weight_, bias_); }

  std::size_t in_dim() const { return weight_.rows(); }
  std::size_t out_dim() const { return weight_.cols(); }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

/// Residual MLP: tanh(in) → blocks of h + L2(tanh(L1(h))) → linear out.
template <typename T>
class ResidualNet {
 public:
  ResidualNet() = default;
  ResidualNet(std::size_t in, std::size_t hidden, std::size_t out, std::size_t blocks, Rng& rng, bool zero_output);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  Linear<T> input_;
  std::vector<std::array<Linear<T>, 2>> blocks_;
  Linear<T> output_;
};

template <typename T>
struct FlowOutput {
  Tensor<T> value;   // n×d
  Tensor<T> logdet;  // n×1
};

/// Affine coupling: z[I1] = y1, z[I2] = y2 ⊙ exp(s) + A(y1, e),
/// s = s_max · tanh(M(y1, e)). log|det| = Σ s.
template <typename T>
class CouplingLayer {
 public:
  CouplingLayer() = default;
  CouplingLayer(std::vector<std::size_t> first, std::vector<std::size_t> second, std::size_t conditioning_dim,
                std::size_t hidden, std::size_t residual_blocks, double scale_clamp, Rng& rng, bool zero_output);

  FlowOutput<T> forward(const Tensor<T>& y, const Tensor<T>& e) const;
  Tensor<T> inverse(const Tensor<T>& z, const Tensor<T>& e) const;

  std::size_t dim() const { return first_.size() + second_.size(); }
  std::size_t conditioning_dim() const { return conditioning_dim_; }
  double scale_clamp() const { return scale_clamp_; }
  const std::vector<std::size_t>& first() const { return first_; }
  const std::vector<std::size_t>& second() const { return second_; }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  struct ScaleShift {
    Tensor<T> log_scale;
    Tensor<T> shift;
  };
  ScaleShift scale_shift(const Tensor<T>& y1, const Tensor<T>& e) const;
  Tensor<T> assemble(const Tensor<T>& a, const Tensor<T>& b) const;

  std::vector<std::size_t> first_;
  std::vector<std::size_t> second_;
  std::vector<std::size_t> order_inverse_;  // columns of [first, second] back to natural order
  bool natural_order_ = true;
  std::size_t conditioning_dim_ = 0;
  double scale_clamp_ = 2.0;
  ResidualNet<T> scale_net_;
  ResidualNet<T> shift_net_;
};

/// Fixed column permutation: out[:, j] = in[:, perm[j]].
class PermutationLayer {
 public:
  PermutationLayer() = default;
  explicit PermutationLayer(std::vector<std::size_t> perm);
  static PermutationLayer random(std::size_t dim, Rng& rng);

  template <typename T>
  Tensor<T> forward(const Tensor<T>& x) const { return gather_cols(x, std::span<const std::size_t>(perm_)); }
  template <typename T>
  Tensor<T> inverse(const Tensor<T>& x) const { return gather_cols(x, std::span<const std::size_t>(inverse_)); }

  const std::vector<std::size_t>& permutation() const { return perm_; }
  std::size_t dim() const { return perm_.size(); }

 private:
  std::vector<std::size_t> perm_;
  std::vector<std::size_t> inverse_;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// Rotation exponential of an axis-angle vector (radians).
Matrix3 rotation_matrix(const std::array<double, 3>& axis_angle);

/// Parametric 3-D rotation x ↦ R x (rows transform as x Rᵀ). log|det| = 0.
class RotationLayer {
 public:
  RotationLayer() = default;
  explicit RotationLayer(std::array<double, 3> axis_angle) : angles_(axis_angle) {}

  template <typename T>
  Tensor<T> forward(const Tensor<T>& x) const;
  template <typename T>
  Tensor<T> inverse(const Tensor<T>& x) const;

  const std::array<double, 3>& angles() const { return angles_; }
  void set_angles(const std::array<double, 3>& a) { angles_ = a; }
  Matrix3 matrix() const { return rotation_matrix(angles_); }

 private:
  std::array<double, 3> angles_{0.0, 0.0, 0.0};
};

template <typename T>
using FlowLayer = std::variant<CouplingLayer<T>, PermutationLayer, RotationLayer>;

/// Shape of a coupling stack: `segments` × `blocks` couplings, each followed
/// by a random permutation. Splits alternate floor(d/2) / ceil(d/2).
struct FlowArch {
  std::size_t dim = 3;
  std::size_t conditioning_dim = 0;
  std::size_t segments = 4;
  std::size_t blocks = 2;
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  double scale_clamp = 2.0;
  bool zero_init = true;  // zero output layers: every coupling starts as the identity
};

template <typename T>
class FlowStack {
 public:
  FlowStack() = default;
  FlowStack(std::size_t dim, std::size_t conditioning_dim) : dim_(dim), conditioning_dim_(conditioning_dim) {}

  static FlowStack build(const FlowArch& arch, Rng& rng);

  void push(FlowLayer<T> layer);

  /// Layers in order; log-dets summed. `e` is 1×c, or undefined when c = 0.
  FlowOutput<T> forward(const Tensor<T>& x, const Tensor<T>& e = {}) const;
  Tensor<T> inverse(const Tensor<T>& z, const Tensor<T>& e = {}) const;

  std::size_t dim() const { return dim_; }
  std::size_t conditioning_dim() const { return conditioning_dim_; }
  const std::vector<FlowLayer<T>>& layers() const { return layers_; }
  std::vector<FlowLayer<T>>& layers() { return layers_; }
  std::size_t segments() const { return segments_; }
  std::size_t blocks() const { return blocks_; }

  std::vector<NamedParameter<T>> parameters(const std::string& prefix) const;

 private:
  void check_input(const char* what, const Tensor<T>& x, const Tensor<T>& e) const;

  std::size_t dim_ = 0;
  std::size_t conditioning_dim_ = 0;
  std::size_t segments_ = 0;
  std::size_t blocks_ = 0;
  std::vector<FlowLayer<T>> layers_;
};

/// −(d/2)·log(2π) − ‖v‖²/2 per row of an n×d batch, as n×1.
template <typename T>
Tensor<T> standard_normal_logpdf(const Tensor<T>& v);

}  // namespace cif
