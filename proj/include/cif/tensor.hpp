#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cif {

using Shape = std::vector<std::size_t>;

/// Incompatible operand shapes. The message names the op and the shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity appeared where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

template <typename T>
struct Node {
  using BackwardFn = std::function<void(const Node& self, std::span<const T> grad_out,
                                        std::vector<std::vector<T>>& grad_in)>;

  Shape shape;
  std::vector<T> value;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major array. A Tensor is a cheap handle: copies share storage.
///
/// Leaves (constants and parameters) own mutable storage; tensors produced by
/// ops are immutable. When a Tape is active and an input requires gradient,
/// the producing op is recorded on that tape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> data);
  static Tensor parameter(Shape shape, std::vector<T> data);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> data() const { return node_->value; }
  /// Writable view of a leaf's storage; op results refuse.
  std::span<T> mutable_data();

  T operator()(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }
  const void* id() const { return node_.get(); }
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

  /// Deep copy into a fresh leaf with the same requires_grad flag.
  Tensor clone() const;

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

template <typename T>
class Tape;

/// Gradients produced by Tape::backward, keyed by tensor identity.
template <typename T>
class Gradients {
 public:
  /// Total derivative of the loss w.r.t. t; all zeros if t has no path to it.
  std::vector<T> of(const Tensor<T>& t) const;
  bool has(const Tensor<T>& t) const { return grads_.count(t.id()) != 0; }

 private:
  friend class Tape<T>;
  std::unordered_map<const void*, std::vector<T>> grads_;
};

/// Ordered record of executed ops. Single writer; separate tapes are
/// independent and may be used from different threads.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::shared_ptr<detail::Node<T>> node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  /// Reverse sweep from a scalar loss. Deterministic: the same tape always
  /// yields bitwise-identical gradients.
  Gradients<T> backward(const Tensor<T>& loss) const;

  /// Tape that ops on this thread record onto, or nullptr.
  static Tape* active();

  /// RAII activation of a tape on the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  /// RAII suspension of recording on the current thread (inference).
  class Suspend {
   public:
    Suspend();
    ~Suspend();
    Suspend(const Suspend&) = delete;
    Suspend& operator=(const Suspend&) = delete;

   private:
    Tape* previous_;
  };

 private:
  static thread_local Tape* active_;
  std::vector<std::shared_ptr<detail::Node<T>>> nodes_;
};

}  // namespace cif
