#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "trm/tensor.hpp"

namespace trm {

// Gradient recording is a per-thread mode. Inside a NoGradGuard scope every
// op produces a constant: no parents, no backward closure, no tape edge.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node<T>&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && !value.empty(); }
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    return Var(std::move(node));
  }

  static Var leaf(Tensor<T> value) {
    auto node = std::make_shared<Node<T>>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad(); }
  // Zero-filled tensor when no gradient has reached this variable.
  Tensor<T> grad() const { return has_grad() ? node_->grad : Tensor<T>(shape()); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  bool is_leaf() const { return node_->parents.empty(); }
  std::size_t num_parents() const { return node_->parents.size(); }

  Var detach() const { return constant(node_->value); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Creates an op result. Records parents and backward closure only when
// gradient mode is on and at least one parent requires a gradient.
template <class T>
Var<T> make_result(Tensor<T> value, const std::vector<Var<T>>& parents, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const auto& p : parents) node->parents.push_back(p.node_ptr());
      node->backward = std::move(backward);
    }
  }
  return Var<T>(std::move(node));
}

// Reverse-mode sweep from a scalar root. Leaf gradients accumulate; interior
// gradients are released after use.
template <class T>
void backward(const Var<T>& root) {
  if (root.value().size() != 1) throw std::invalid_argument("backward() needs a scalar root");
  if (!root.requires_grad()) return;

  std::vector<Node<T>*> order;
  {
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    std::unordered_set<Node<T>*> marks;
    auto marked = [&marks](Node<T>* n) { return marks.count(n) != 0; };
    auto mark = [&marks](Node<T>* n) { marks.insert(n); };
    stack.emplace_back(root.node(), 0);
    mark(root.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node<T>* parent = node->parents[next++].get();
        if (parent->requires_grad && !marked(parent)) {
          mark(parent);
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  root.node()->grad_buffer()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward || !node->has_grad()) continue;
    for (auto& p : node->parents) {
      if (p->requires_grad) p->grad_buffer();
    }
    node->backward(*node);
    if (!node->parents.empty()) node->grad = Tensor<T>();
  }
}

}  // namespace trm
