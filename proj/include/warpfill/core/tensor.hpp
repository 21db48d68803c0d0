/*
Copyright 2026 The warpfill Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace warpfill {

using Shape = std::vector<int>;

inline std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// One vertex of the reverse-mode graph. `grad` is allocated on first use.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

// Disables graph construction for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value.assign(numel_of(shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor full(const Shape& shape, double v, bool requires_grad = false) {
    Tensor t = zeros(shape, requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
  }

  static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false) {
    if (values.size() != numel_of(shape)) {
      throw std::invalid_argument("Tensor::from: " + std::to_string(values.size()) +
                                  " values for shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = shape;
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i < 0 ? i + rank() : i)); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t numel() const { return node_->value.size(); }

  std::vector<double>& data() { return node_->value; }
  const std::vector<double>& data() const { return node_->value; }
  double item() const {
    if (numel() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }

  // Gradient accumulated by backward(); zeros if none has arrived.
  std::vector<double> grad() const {
    if (node_->grad.size() != node_->value.size()) return std::vector<double>(numel(), 0.0);
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // Detached copy of the values.
  Tensor detach() const { return from(shape(), data(), false); }
  Tensor clone(bool requires_grad = false) const { return from(shape(), data(), requires_grad); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

namespace detail {

inline bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

// Builds an output node. When no input requires a gradient the backward
// closure is dropped so frozen sub-graphs cost nothing.
inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool need = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) need = need || (t.defined() && t.requires_grad());
  }
  if (need) {
    n->requires_grad = true;
    for (Tensor& t : inputs) {
      if (t.defined() && t.requires_grad()) n->parents.push_back(t.ptr());
    }
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace detail

// Reverse sweep from `root`, seeded with `seed` (defaults to ones).
inline void backward(const Tensor& root, const std::vector<double>* seed = nullptr) {
  if (!root.requires_grad()) return;
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  auto& g = root.node()->grad_buffer();
  if (seed) {
    if (seed->size() != g.size()) throw std::invalid_argument("backward: seed size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*seed)[i];
  } else {
    for (double& v : g) v += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
  // Intermediate gradients are not needed once the sweep is done.
  for (Node* n : order) {
    if (n->backward) n->grad.clear();
  }
}

}  // namespace warpfill
