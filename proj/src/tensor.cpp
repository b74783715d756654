#include "cif/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cif {

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

template <typename T>
std::shared_ptr<detail::Node<T>> make_leaf(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  for (T v : data) {
    if (!std::isfinite(v)) throw NumericError("tensor: non-finite value in leaf data");
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> data) {
  return Tensor(make_leaf(std::move(shape), std::move(data), true));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  std::vector<T> data(shape_size(shape), T(0));
  return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  std::vector<T> data(shape_size(shape), value);
  return Tensor(make_leaf(std::move(shape), std::move(data), false));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(make_leaf(Shape{}, std::vector<T>{value}, false));
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  return rank() == 2 ? node_->shape[0] : 1;
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (rank() == 2) return node_->shape[1];
  if (rank() == 1) return node_->shape[0];
  return 1;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_->leaf) {
    throw std::logic_error(std::string("tensor: result of '") + node_->op + "' is immutable");
  }
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(make_leaf(node_->shape, node_->value, node_->requires_grad));
}

template <typename T>
std::vector<T> Gradients<T>::of(const Tensor<T>& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return std::vector<T>(t.size(), T(0));
  return it->second;
}

template <typename T>
thread_local Tape<T>* Tape<T>::active_ = nullptr;

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_;
}

template <typename T>
Tape<T>::Scope::Scope(Tape& tape) : previous_(active_) {
  active_ = &tape;
}

template <typename T>
Tape<T>::Scope::~Scope() {
  active_ = previous_;
}

template <typename T>
Tape<T>::Suspend::Suspend() : previous_(active_) {
  active_ = nullptr;
}

template <typename T>
Tape<T>::Suspend::~Suspend() {
  active_ = previous_;
}

template <typename T>
Gradients<T> Tape<T>::backward(const Tensor<T>& loss) const {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (nodes_.empty()) throw std::logic_error("backward: tape is empty");

  Gradients<T> out;
  auto& grads = out.grads_;
  grads[loss.id()] = std::vector<T>{T(1)};

  const void* loss_id = loss.id();
  auto it = std::find_if(nodes_.rbegin(), nodes_.rend(),
                         [&](const auto& n) { return n.get() == loss_id; });
  if (it == nodes_.rend() && !loss.is_leaf()) {
    throw std::logic_error("backward: loss was not recorded on this tape");
  }

  std::vector<std::vector<T>> grad_in;
  for (; it != nodes_.rend(); ++it) {
    const detail::Node<T>& node = **it;
    auto found = grads.find(&node);
    if (found == grads.end()) continue;
    std::vector<T> grad_out = std::move(found->second);
    grads.erase(found);

    grad_in.assign(node.inputs.size(), {});
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (node.inputs[i]->requires_grad) grad_in[i].assign(node.inputs[i]->value.size(), T(0));
    }
    node.backward(node, grad_out, grad_in);

    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (grad_in[i].empty()) continue;
      auto& acc = grads[node.inputs[i].get()];
      if (acc.empty()) {
        acc = std::move(grad_in[i]);
      } else {
        for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += grad_in[i][k];
      }
    }
  }
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template class Gradients<float>;
template class Gradients<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace cif
