#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "somnilex/ad/tensor.hpp"

namespace somnilex::ad {

template <class S>
class Node;
template <class S>
using NodePtr = std::shared_ptr<Node<S>>;

// Thread-local gradient recording switch. Inference paths disable recording
// so forward passes build no graph; each training worker is a single thread,
// so a thread-local flag is the whole synchronization story.
inline bool& grad_recording_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  bool previous;
  NoGradGuard() : previous(grad_recording_enabled()) {
    grad_recording_enabled() = false;
  }
  ~NoGradGuard() { grad_recording_enabled() = previous; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// One vertex of the reverse-mode tape: a value, its gradient accumulator,
// and a closure that pushes this node's gradient into its parents.
template <class S>
class Node {
 public:
  Tensor<S> value;
  Tensor<S> grad;  // allocated lazily by the backward pass
  bool requires_grad = false;
  std::vector<NodePtr<S>> parents;
  std::function<void(Node<S>&)> backward_op;

  explicit Node(Tensor<S> v, bool rg = false)
      : value(std::move(v)), requires_grad(rg) {}

  void ensure_grad() {
    if (grad.data.empty()) {
      grad.shape = value.shape;
      grad.data.assign(value.numel(), S(0));
    }
  }

  void zero_grad() {
    grad.shape.clear();
    grad.data.clear();
  }
};

template <class S>
NodePtr<S> leaf(Tensor<S> v, bool requires_grad = false) {
  return std::make_shared<Node<S>>(std::move(v), requires_grad);
}

template <class S>
NodePtr<S> constant(Tensor<S> v) {
  return leaf(std::move(v), false);
}

// Creates an interior node. When gradient recording is off, or no parent
// requires a gradient, the node is detached (no parents, no backward op) so
// inference retains nothing.
template <class S>
NodePtr<S> make_node(Tensor<S> v, std::vector<NodePtr<S>> parents,
                     std::function<void(Node<S>&)> backward_op) {
  bool need = false;
  if (grad_recording_enabled())
    for (const auto& p : parents)
      if (p && p->requires_grad) {
        need = true;
        break;
      }
  auto n = std::make_shared<Node<S>>(std::move(v), need);
  if (need) {
    n->parents = std::move(parents);
    n->backward_op = std::move(backward_op);
  }
  return n;
}

// Reverse-mode sweep from a scalar root. Nodes are visited in reverse
// topological order, each exactly once; gradients of shared subexpressions
// accumulate by summation.
template <class S>
void backward(const NodePtr<S>& root) {
  if (root->value.numel() != 1)
    throw ShapeError("backward requires a scalar root, got shape " +
                     root->value.shape_str());

  // Iterative post-order DFS: parents first, then the node itself.
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> visited;
  struct Frame {
    Node<S>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (root->requires_grad) stack.push_back({root.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent == 0) {
      if (visited.count(f.node)) {
        stack.pop_back();
        continue;
      }
      visited.insert(f.node);
    }
    if (f.next_parent < f.node->parents.size()) {
      Node<S>* p = f.node->parents[f.next_parent++].get();
      if (p && p->requires_grad && !visited.count(p))
        stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.data[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward_op) {
      n->ensure_grad();
      n->backward_op(*n);
    }
  }
}

}  // namespace somnilex::ad
