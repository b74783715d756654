#include "cif/encoder.hpp"

#include <cmath>

namespace cif {

template <typename T>
SetEncoder<T>::SetEncoder(const EncoderArch& arch, Rng& rng) : arch_(arch) {
  if (arch.point_widths.empty()) throw std::invalid_argument("encoder: at least one per-point layer is required");
  if (arch.out_dim == 0) throw std::invalid_argument("encoder: output dimension must be positive");
  std::size_t in = 3;
  for (auto w : arch.point_widths) {
    Linear<T> layer(in, w);
    layer.init_normal(rng, std::sqrt(2.0 / static_cast<double>(in)));
    point_layers_.push_back(std::move(layer));
    in = w;
  }
  for (auto w : arch.head_widths) {
    Linear<T> layer(in, w);
    layer.init_normal(rng, std::sqrt(2.0 / static_cast<double>(in)));
    head_layers_.push_back(std::move(layer));
    in = w;
  }
  Linear<T> last(in, arch.out_dim);
  last.init_normal(rng, std::sqrt(1.0 / static_cast<double>(in)));
  head_layers_.push_back(std::move(last));
}

template <typename T>
Tensor<T> SetEncoder<T>::point_features(const Tensor<T>& points) const {
  if (!points.defined() || points.rank() != 2 || points.cols() != 3) {
    throw ShapeError("encoder: expected n x 3 points, got " +
                     (points.defined() ? shape_str(points.shape()) : std::string("<none>")));
  }
  if (points.rows() == 0) throw ShapeError("encoder: empty cloud");
  Tensor<T> h = points;
  for (const auto& layer : point_layers_) h = relu(layer(h));
  return h;
}

template <typename T>
Tensor<T> SetEncoder<T>::encode(const Tensor<T>& points) const {
  Tensor<T> h = pooled(points);
  for (std::size_t i = 0; i + 1 < head_layers_.size(); ++i) h = relu(head_layers_[i](h));
  return head_layers_.back()(h);
}

template <typename T>
void SetEncoder<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  for (std::size_t i = 0; i < point_layers_.size(); ++i) point_layers_[i].collect(prefix + ".point" + std::to_string(i), out);
  for (std::size_t i = 0; i < head_layers_.size(); ++i) head_layers_[i].collect(prefix + ".head" + std::to_string(i), out);
}

template class SetEncoder<float>;
template class SetEncoder<double>;

}  // namespace cif
