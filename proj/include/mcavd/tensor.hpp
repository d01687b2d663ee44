// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mcavd/error.hpp"

namespace mcavd {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad; // persistent for leaves, scratch during backward otherwise
  bool requires_grad = false;
  bool leaf = true;
};

} // namespace detail

/// Dense row-major n-dimensional array. Value-semantic handle to shared
/// storage; ops executed while a tape is recording register a backward
/// closure so reverse replay yields gradients for every requires_grad leaf.
template <typename T>
class Tensor {
public:
  using Node = detail::TensorNode<T>;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    int64_t n = shape_numel(shape);
    node_->shape = std::move(shape);
    node_->value.assign(static_cast<size_t>(n), fill);
    node_->requires_grad = requires_grad;
    if (requires_grad) node_->grad.assign(static_cast<size_t>(n), T(0));
  }

  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw ShapeError("tensor data size " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    Tensor t;
    t.node_ = std::make_shared<Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    if (requires_grad) t.node_->grad.assign(t.node_->value.size(), T(0));
    return t;
  }

  /// Output of an op: non-leaf, grad buffer managed by the tape.
  static Tensor op_result(Shape shape, std::vector<T> value, bool requires_grad) {
    Tensor t = from(std::move(shape), std::move(value), false);
    t.node_->requires_grad = requires_grad;
    t.node_->leaf = !requires_grad;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

  // Handle semantics: a const Tensor is a const handle to shared, mutable
  // storage, so the accessors are const-qualified.
  std::vector<T>& value() const { return node_->value; }

  /// Gradient accumulator; allocated lazily for non-leaf nodes.
  std::vector<T>& grad() const {
    if (node_->grad.size() != node_->value.size())
      node_->grad.assign(node_->value.size(), T(0));
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  void zero_grad() const {
    if (node_->requires_grad) node_->grad.assign(node_->value.size(), T(0));
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }

  Node* node() const { return node_.get(); }
  std::shared_ptr<Node> node_ptr() const { return node_; }

private:
  std::shared_ptr<Node> node_;
};

/// Ordered record of executed differentiable operations. Ops append a
/// backward closure as they run; backward() replays the record in reverse,
/// accumulating additively across fan-out. One tape per thread.
template <typename T>
class Tape {
public:
  static Tape& active();

  bool recording() const { return pause_depth_ == 0; }

  void record(const Tensor<T>& output, std::function<void()> backward_fn) {
    entries_.push_back(Entry{output.node_ptr(), std::move(backward_fn)});
  }

  /// Populates dLoss/dLeaf for every requires_grad leaf reachable from
  /// `loss`. Leaf gradients accumulate across calls; intermediate buffers
  /// are reset on each call.
  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw ShapeError("backward requires a scalar loss, got shape " +
                       (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
    for (auto& e : entries_)
      e.out->grad.assign(e.out->value.size(), T(0));
    if (loss.node()->leaf) {
      if (loss.requires_grad()) loss.node()->grad[0] += T(1);
      return; // loss is a constant or a bare leaf: nothing recorded to replay
    }
    loss.node()->grad[0] = T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
  }

  void clear() { entries_.clear(); }
  size_t size() const { return entries_.size(); }

  struct PauseGuard {
    PauseGuard() { ++Tape::active().pause_depth_; }
    ~PauseGuard() { --Tape::active().pause_depth_; }
    PauseGuard(const PauseGuard&) = delete;
    PauseGuard& operator=(const PauseGuard&) = delete;
  };

private:
  struct Entry {
    std::shared_ptr<detail::TensorNode<T>> out;
    std::function<void()> fn;
  };
  std::vector<Entry> entries_;
  int pause_depth_ = 0;
};

/// Runs the active tape for `loss`'s scalar type.
template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>::active().backward(loss);
}

/// Scoped "no recording" region (evaluation-mode forwards).
template <typename T>
using NoGrad = typename Tape<T>::PauseGuard;

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

} // namespace mcavd
