#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>

#include "rgi/core.hpp"

namespace rgi {

// Reverse-mode autodiff over dense row-major tensors.
//
// Each op creates a fresh node holding its value, the parent handles, and a
// closure that routes the node's gradient into the parents. backward() walks
// the reachable graph in reverse creation order. Parameters are long-lived
// leaf nodes; everything else is created per forward pass and freed when the
// last handle drops.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  std::function<void(TensorNode<T>&)> backward_fn;

  int numel() const { return static_cast<int>(value.size()); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

namespace detail {
inline std::atomic<uint64_t>& tensor_seq_counter() {
  static std::atomic<uint64_t> c{0};
  return c;
}
}  // namespace detail

template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;
  using NodePtr = std::shared_ptr<Node>;

  Tensor() = default;
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

  static Tensor zeros(Shape s) { return full(std::move(s), T(0)); }

  static Tensor full(Shape s, T v) {
    auto n = fresh_node();
    n->shape = std::move(s);
    n->value.assign(numel_of(n->shape), v);
    return Tensor(n);
  }

  static Tensor from(Shape s, std::vector<T> v) {
    RGI_CHECK(numel_of(s) == static_cast<int>(v.size()),
              "tensor data size does not match shape " + shape_str(s));
    auto n = fresh_node();
    n->shape = std::move(s);
    n->value = std::move(v);
    return Tensor(n);
  }

  static Tensor scalar(T v) { return full({1}, v); }

  static Tensor randn(Shape s, Rng& rng, T stddev = T(1), T mean = T(0)) {
    auto n = fresh_node();
    n->shape = std::move(s);
    n->value.resize(numel_of(n->shape));
    for (auto& x : n->value) x = mean + stddev * static_cast<T>(rng.normal());
    return Tensor(n);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int numel() const { return node_->numel(); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }

  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }
  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  T item() const {
    RGI_CHECK(numel() == 1, "item() requires a scalar tensor");
    return node_->value[0];
  }

  Tensor& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const std::vector<T>& grad() const { return node_->grad; }
  std::vector<T>& grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), T(0));
  }

  NodePtr node() const { return node_; }
  Node* raw() const { return node_.get(); }

  // Leaf copy sharing no graph history (value is copied).
  Tensor detach() const {
    auto n = fresh_node();
    n->shape = node_->shape;
    n->value = node_->value;
    return Tensor(n);
  }

  // Backpropagate from this scalar through every reachable node that
  // requires a gradient.
  void backward() {
    RGI_CHECK(numel() == 1, "backward() must start from a scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
      Node* n = stack.back();
      stack.pop_back();
      order.push_back(n);
      for (auto& p : n->parents) {
        if (p->requires_grad && seen.insert(p.get()).second)
          stack.push_back(p.get());
      }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });
    node_->ensure_grad();
    node_->grad[0] = T(1);
    for (Node* n : order) {
      if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
  }

  static NodePtr fresh_node() {
    auto n = std::make_shared<Node>();
    n->seq = detail::tensor_seq_counter().fetch_add(1, std::memory_order_relaxed);
    return n;
  }

 private:
  NodePtr node_;
};

// Helper for op implementations: make the result node, wire parents, and mark
// requires_grad if any parent needs it. The backward closure is installed by
// the caller only when grad is required.
template <typename T>
typename Tensor<T>::NodePtr make_op_node(Shape shape,
                                         std::vector<typename Tensor<T>::NodePtr> parents) {
  auto n = Tensor<T>::fresh_node();
  n->shape = std::move(shape);
  n->value.assign(numel_of(n->shape), T(0));
  n->parents = std::move(parents);
  for (auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

}  // namespace rgi
