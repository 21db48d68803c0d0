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
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "warpfill/core/rng.hpp"
#include "warpfill/core/tensor.hpp"

namespace warpfill {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Ordered collection of trainable arrays. Order is registration order and is
// what checkpoints and optimizers rely on.
class ParamSet {
 public:
  Tensor add(const std::string& name, const Shape& shape, double init_value = 0.0) {
    Tensor t = Tensor::full(shape, init_value, true);
    entries_.push_back({name, t});
    return t;
  }

  // Normal(0, gain / sqrt(fan_in)) initialisation.
  Tensor add_normal(const std::string& name, const Shape& shape, Rng& rng, double gain = 1.0) {
    Tensor t = Tensor::zeros(shape, true);
    int fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    const double sd = gain / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) v = sd * rng.normal();
    entries_.push_back({name, t});
    return t;
  }

  const std::vector<NamedTensor>& entries() const { return entries_; }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor);
    return out;
  }

  Tensor get(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return e.tensor;
    }
    throw std::out_of_range("ParamSet: no parameter named " + name);
  }

  void set_requires_grad(bool r) const {
    for (const auto& e : entries_) e.tensor.node()->requires_grad = r;
  }
  void zero_grad() const {
    for (const auto& e : entries_) e.tensor.node()->grad.clear();
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  // Deep copy of all values, used for freezing checks and snapshots.
  std::vector<std::vector<double>> snapshot() const {
    std::vector<std::vector<double>> out;
    for (const auto& e : entries_) out.push_back(e.tensor.data());
    return out;
  }
  void restore(const std::vector<std::vector<double>>& values) const {
    if (values.size() != entries_.size()) throw std::invalid_argument("ParamSet::restore: size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) entries_[i].tensor.node()->value = values[i];
  }

  // Copies values from another set with identical layout.
  void copy_from(const ParamSet& other) const { restore(other.snapshot()); }

 private:
  std::vector<NamedTensor> entries_;
};

}  // namespace warpfill
