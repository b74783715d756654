#include "cif/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cif {

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.embedding_dim = 32;
  c.point_segments = 10;
  c.point_blocks = 3;
  c.prior_segments = 5;
  c.prior_blocks = 2;
  c.hidden = 64;
  return c;
}

FlowArch ModelConfig::point_arch() const {
  return {3, embedding_dim, point_segments, point_blocks, hidden, residual_blocks, scale_clamp, zero_init};
}

FlowArch ModelConfig::prior_arch() const {
  return {embedding_dim, 0, prior_segments, prior_blocks, hidden, residual_blocks, scale_clamp, zero_init};
}

EncoderArch ModelConfig::encoder_arch() const {
  return {encoder_point_widths, encoder_head_widths, embedding_dim};
}

template <typename T>
Tensor<T> to_tensor(const PointCloud& cloud) {
  std::vector<T> data;
  data.reserve(cloud.size() * 3);
  for (const auto& p : cloud.points)
    for (double v : p) data.push_back(static_cast<T>(v));
  return Tensor<T>::constant({cloud.size(), 3}, std::move(data));
}

template <typename T>
PointCloud to_cloud(const Tensor<T>& points) {
  if (points.rank() != 2 || points.cols() != 3) throw ShapeError("to_cloud: expected n x 3, got " + shape_str(points.shape()));
  PointCloud cloud;
  auto d = points.data();
  cloud.points.resize(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i)
    for (std::size_t k = 0; k < 3; ++k) cloud.points[i][k] = static_cast<double>(d[i * 3 + k]);
  return cloud;
}

namespace {

template <typename T>
struct Parts {
  SetEncoder<T> encoder;
  FlowStack<T> prior;
  FlowStack<T> point;
};

template <typename T>
Parts<T> build_parts(const ModelConfig& config) {
  if (config.embedding_dim < 2) throw std::invalid_argument("model: embedding dimension must be at least 2");
  Rng rng(config.seed);
  SetEncoder<T> encoder(config.encoder_arch(), rng);
  FlowStack<T> prior = FlowStack<T>::build(config.prior_arch(), rng);
  FlowStack<T> point = FlowStack<T>::build(config.point_arch(), rng);
  return {std::move(encoder), std::move(prior), std::move(point)};
}

}  // namespace

template <typename T>
CifModel<T>::CifModel(const ModelConfig& config) : config_(config) {
  auto parts = build_parts<T>(config);
  encoder_ = std::move(parts.encoder);
  prior_flow_ = std::move(parts.prior);
  point_flow_ = std::move(parts.point);
  validate();
}

template <typename T>
CifModel<T>::CifModel(ModelConfig config, SetEncoder<T> encoder, FlowStack<T> prior_flow, FlowStack<T> point_flow)
    : config_(std::move(config)),
      encoder_(std::move(encoder)),
      prior_flow_(std::move(prior_flow)),
      point_flow_(std::move(point_flow)) {
  validate();
}

template <typename T>
void CifModel<T>::validate() const {
  const std::size_t d = config_.embedding_dim;
  if (encoder_.out_dim() != d || prior_flow_.dim() != d || prior_flow_.conditioning_dim() != 0 ||
      point_flow_.dim() != 3 || point_flow_.conditioning_dim() != d) {
    throw std::invalid_argument("model: inconsistent embedding dimensions across encoder and flows");
  }
}

template <typename T>
PointLogLik<T> CifModel<T>::point_loglik(const Tensor<T>& xf, const Tensor<T>& e) const {
  if (xf.rank() != 2 || xf.rows() == 0) throw ShapeError("point_loglik: need at least one point");
  auto out = point_flow_.forward(xf, e);
  Tensor<T> per_point = add(standard_normal_logpdf(out.value), out.logdet);
  return {sum(per_point), per_point};
}

template <typename T>
CloudEmbedding<T> CifModel<T>::embed(const Tensor<T>& xh) const {
  Tensor<T> w = encoder_.encode(xh);
  auto out = prior_flow_.forward(w);
  Tensor<T> log_pw = sum(add(standard_normal_logpdf(out.value), out.logdet));
  return {w, out.value, log_pw};
}

template <typename T>
LossTerms<T> CifModel<T>::loss_terms(const Tensor<T>& xf, const Tensor<T>& xh) const {
  CloudEmbedding<T> emb = embed(xh);
  PointLogLik<T> ll = point_loglik(xf, emb.e);
  Tensor<T> loss = neg(add(ll.total, emb.log_pw));
  return {loss, ll.total, emb.log_pw, xf.rows()};
}

template <typename T>
PointCloud CifModel<T>::decode(const Tensor<T>& e, std::size_t n_points, Rng& rng) const {
  if (n_points == 0) throw std::invalid_argument("decode: n_points must be at least 1");
  typename Tape<T>::Suspend no_grad;
  std::vector<T> z(n_points * 3);
  for (auto& v : z) v = static_cast<T>(standard_normal(rng));
  Tensor<T> x = point_flow_.inverse(Tensor<T>::constant({n_points, 3}, std::move(z)), e);
  return to_cloud(x);
}

template <typename T>
PointCloud CifModel<T>::sample_cloud(std::size_t n_points, double temperature, Rng& rng) const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("sample_cloud: temperature must be positive");
  }
  if (n_points == 0) throw std::invalid_argument("sample_cloud: n_points must be at least 1");
  std::vector<T> e(config_.embedding_dim);
  for (auto& v : e) v = static_cast<T>(temperature * standard_normal(rng));
  PointCloud out = decode(Tensor<T>::constant({1, config_.embedding_dim}, std::move(e)), n_points, rng);
  out.id = "sample";
  return out;
}

template <typename T>
PointCloud CifModel<T>::reconstruct(const PointCloud& cloud, std::size_t n_points, Rng& rng) const {
  typename Tape<T>::Suspend no_grad;
  CloudEmbedding<T> emb = embed(to_tensor<T>(cloud));
  PointCloud out = decode(emb.e, n_points, rng);
  out.id = cloud.id + "_reconstruction";
  out.family = cloud.family;
  return out;
}

template <typename T>
std::vector<PointCloud> CifModel<T>::interpolate(const PointCloud& a, const PointCloud& b, std::size_t steps,
                                                 std::size_t n_points, Rng& rng) const {
  if (steps < 2) throw std::invalid_argument("interpolate: steps must be at least 2");
  if (n_points == 0) throw std::invalid_argument("interpolate: n_points must be at least 1");
  typename Tape<T>::Suspend no_grad;
  const Tensor<T> ta = embed(to_tensor<T>(a)).e;
  const Tensor<T> tb = embed(to_tensor<T>(b)).e;
  auto ea = ta.data();
  auto eb = tb.data();
  std::vector<T> z(n_points * 3);
  for (auto& v : z) v = static_cast<T>(standard_normal(rng));
  Tensor<T> zt = Tensor<T>::constant({n_points, 3}, std::move(z));

  std::vector<PointCloud> out;
  for (std::size_t k = 0; k < steps; ++k) {
    const T t = static_cast<T>(static_cast<double>(k) / static_cast<double>(steps - 1));
    std::vector<T> e(ea.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = (T(1) - t) * ea[i] + t * eb[i];
    const std::size_t d = e.size();
    PointCloud c = to_cloud(point_flow_.inverse(zt, Tensor<T>::constant({1, d}, std::move(e))));
    c.id = "interp_" + std::to_string(k);
    out.push_back(std::move(c));
  }
  return out;
}

template <typename T>
std::vector<RankedCloud> CifModel<T>::rank_by_embedding_nll(const std::vector<PointCloud>& clouds) const {
  typename Tape<T>::Suspend no_grad;
  std::vector<RankedCloud> ranked;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    double score = -static_cast<double>(embed(to_tensor<T>(clouds[i])).log_pw.item());
    ranked.push_back({i, clouds[i].id, score});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.score > y.score; });
  return ranked;
}

template <typename T>
std::vector<NamedParameter<T>> CifModel<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  encoder_.collect("encoder", out);
  for (auto& p : prior_flow_.parameters("prior")) out.push_back(std::move(p));
  for (auto& p : point_flow_.parameters("point")) out.push_back(std::move(p));
  return out;
}

template Tensor<float> to_tensor<float>(const PointCloud&);
template Tensor<double> to_tensor<double>(const PointCloud&);
template PointCloud to_cloud<float>(const Tensor<float>&);
template PointCloud to_cloud<double>(const Tensor<double>&);
template class CifModel<float>;
template class CifModel<double>;

}  // namespace cif
