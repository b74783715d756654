#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cif/flow.hpp"

namespace cif {

struct EncoderArch {
  std::vector<std::size_t> point_widths{64, 128, 256};
  std::vector<std::size_t> head_widths{128};
  std::size_t out_dim = 8;
};

/// PointNet-style set encoder: a shared per-point ReLU MLP, max-pooled over
/// points, then a head MLP whose last layer is linear.
template <typename T>
class SetEncoder {
 public:
  SetEncoder() = default;
  SetEncoder(const EncoderArch& arch, Rng& rng);

  /// n×3 points → 1×out_dim.
  Tensor<T> encode(const Tensor<T>& points) const;
  /// Per-point features before pooling, n×width.
  Tensor<T> point_features(const Tensor<T>& points) const;
  Tensor<T> pooled(const Tensor<T>& points) const { return reduce_max(point_features(points), 0); }

  const EncoderArch& arch() const { return arch_; }
  std::size_t out_dim() const { return arch_.out_dim; }
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;

 private:
  EncoderArch arch_;
  std::vector<Linear<T>> point_layers_;
  std::vector<Linear<T>> head_layers_;
};

}  // namespace cif
