#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cif/dataset.hpp"
#include "cif/encoder.hpp"
#include "cif/flow.hpp"

namespace cif {

struct ModelConfig {
  std::size_t embedding_dim = 8;
  std::size_t point_segments = 4;
  std::size_t point_blocks = 2;
  std::size_t prior_segments = 2;
  std::size_t prior_blocks = 2;
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  double scale_clamp = 2.0;
  std::vector<std::size_t> encoder_point_widths{64, 128, 256};
  std::vector<std::size_t> encoder_head_widths{128};
  std::uint64_t seed = 0;
  bool zero_init = true;

  /// 10×3 point flow, 5×2 prior flow, 32-D embedding, width-64 ResNets.
  static ModelConfig full_scale();

  FlowArch point_arch() const;
  FlowArch prior_arch() const;
  EncoderArch encoder_arch() const;
};

template <typename T>
struct PointLogLik {
  Tensor<T> total;      // scalar
  Tensor<T> per_point;  // n×1
};

template <typename T>
struct CloudEmbedding {
  Tensor<T> w;       // 1×D encoder output
  Tensor<T> e;       // 1×D, prior_flow(w)
  Tensor<T> log_pw;  // scalar: log p_E(e) + log|det ∂g/∂w|
};

template <typename T>
struct LossTerms {
  Tensor<T> loss;          // scalar: −point_loglik − log_pw
  Tensor<T> point_loglik;  // scalar
  Tensor<T> log_pw;        // scalar
  std::size_t n_points = 0;
};

struct RankedCloud {
  std::size_t index = 0;
  std::string id;
  double score = 0.0;  // −log_pw; larger is rarer
};

template <typename T>
Tensor<T> to_tensor(const PointCloud& cloud);
template <typename T>
PointCloud to_cloud(const Tensor<T>& points);

/// Conditional invertible flow over point clouds: set encoder h, prior flow
/// g on the embedding, and point flow f conditioned on e = g(h(x)).
template <typename T>
class CifModel {
 public:
  explicit CifModel(const ModelConfig& config = {});
  CifModel(ModelConfig config, SetEncoder<T> encoder, FlowStack<T> prior_flow, FlowStack<T> point_flow);

  PointLogLik<T> point_loglik(const Tensor<T>& xf, const Tensor<T>& e) const;
  CloudEmbedding<T> embed(const Tensor<T>& xh) const;
  LossTerms<T> loss_terms(const Tensor<T>& xf, const Tensor<T>& xh) const;
  Tensor<T> loss(const Tensor<T>& xf, const Tensor<T>& xh) const { return loss_terms(xf, xh).loss; }

  /// e ~ N(0, temperature²·I), z ~ N(0, I), points = f⁻¹(z, e).
  PointCloud sample_cloud(std::size_t n_points, double temperature, Rng& rng) const;
  /// f⁻¹ of fresh standard-normal points under a fixed embedding (1×D).
  PointCloud decode(const Tensor<T>& e, std::size_t n_points, Rng& rng) const;
  PointCloud reconstruct(const PointCloud& cloud, std::size_t n_points, Rng& rng) const;
  /// Linear path in e-space; every step decodes the same z sample.
  std::vector<PointCloud> interpolate(const PointCloud& a, const PointCloud& b, std::size_t steps,
                                      std::size_t n_points, Rng& rng) const;
  /// Sorted by −log_pw, rarest first; ties keep input order.
  std::vector<RankedCloud> rank_by_embedding_nll(const std::vector<PointCloud>& clouds) const;

  Tensor<T> null_embedding() const { return Tensor<T>::zeros({1, config_.embedding_dim}); }

  const ModelConfig& config() const { return config_; }
  std::size_t embedding_dim() const { return config_.embedding_dim; }
  const SetEncoder<T>& encoder() const { return encoder_; }
  const FlowStack<T>& prior_flow() const { return prior_flow_; }
  const FlowStack<T>& point_flow() const { return point_flow_; }
  FlowStack<T>& prior_flow() { return prior_flow_; }
  FlowStack<T>& point_flow() { return point_flow_; }

  /// Every trainable tensor under a stable name ("encoder.*", "prior.*", "point.*").
  std::vector<NamedParameter<T>> parameters() const;

 private:
  void validate() const;

  ModelConfig config_;
  SetEncoder<T> encoder_;
  FlowStack<T> prior_flow_;
  FlowStack<T> point_flow_;
};

}  // namespace cif
