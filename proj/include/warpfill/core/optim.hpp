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
#include <string>
#include <vector>

#include "warpfill/core/params.hpp"

namespace warpfill {

enum class OptimizerKind { kAdam, kRanger };

// Adaptive-moment optimizer. The Ranger variant swaps in rectified moments and
// a lookahead slow copy (k = 6, alpha = 0.5).
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, OptimizerKind kind = OptimizerKind::kAdam, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), kind_(kind) {
    for (const Tensor& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
      if (kind_ == OptimizerKind::kRanger) slow_.push_back(p.data());
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    // Rectification term of RAdam.
    const double rho_inf = 2.0 / (1.0 - beta2_) - 1.0;
    const double bt = std::pow(beta2_, static_cast<double>(t_));
    const double rho_t = rho_inf - 2.0 * static_cast<double>(t_) * bt / (1.0 - bt);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      if (p.node()->grad.size() != p.numel()) continue;
      auto& val = p.data();
      const auto& g = p.node()->grad;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < val.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        if (kind_ == OptimizerKind::kAdam) {
          val[i] -= lr_ * mhat / (std::sqrt(v[i] / bc2) + eps_);
        } else if (rho_t > 5.0) {
          const double r = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
          val[i] -= lr_ * r * mhat / (std::sqrt(v[i] / bc2) + eps_);
        } else {
          val[i] -= lr_ * mhat;
        }
      }
    }
    if (kind_ == OptimizerKind::kRanger && t_ % 6 == 0) {
      for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& val = params_[k].data();
        for (std::size_t i = 0; i < val.size(); ++i) {
          slow_[k][i] += 0.5 * (val[i] - slow_[k][i]);
          val[i] = slow_[k][i];
        }
      }
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  long steps() const { return t_; }

  // Flattened optimizer state for checkpoints.
  std::vector<NamedTensor> state(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    out.push_back({prefix + "/t", Tensor::scalar(static_cast<double>(t_))});
    out.push_back({prefix + "/lr", Tensor::scalar(lr_)});
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const int n = static_cast<int>(m_[k].size());
      out.push_back({prefix + "/m" + std::to_string(k), Tensor::from({n}, m_[k])});
      out.push_back({prefix + "/v" + std::to_string(k), Tensor::from({n}, v_[k])});
      if (kind_ == OptimizerKind::kRanger) out.push_back({prefix + "/slow" + std::to_string(k), Tensor::from({n}, slow_[k])});
    }
    return out;
  }

  template <typename Lookup>
  void load_state(const std::string& prefix, Lookup&& lookup) {
    t_ = static_cast<long>(lookup(prefix + "/t")[0]);
    lr_ = lookup(prefix + "/lr")[0];
    for (std::size_t k = 0; k < params_.size(); ++k) {
      m_[k] = lookup(prefix + "/m" + std::to_string(k));
      v_[k] = lookup(prefix + "/v" + std::to_string(k));
      if (kind_ == OptimizerKind::kRanger) slow_[k] = lookup(prefix + "/slow" + std::to_string(k));
    }
  }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_, slow_;
  double lr_, beta1_, beta2_, eps_;
  OptimizerKind kind_;
  long t_ = 0;
};

}  // namespace warpfill
