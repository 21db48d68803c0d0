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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "warpfill/core/rng.hpp"
#include "warpfill/core/tensor.hpp"

namespace warpfill {

struct GradCheckResult {
  double rel_error = 0.0;  // || analytic - numeric || / max(||numeric||, ||analytic||, floor)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  int checked = 0;
};

// Compares reverse-mode gradients of the scalar `f` against central
// differences. At most `max_coords` coordinates per input are probed (chosen
// with `seed`); relative error is measured on the probed sub-vector as a
// whole, which is robust to individual near-zero entries.
inline GradCheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                                 double step = 1e-6, int max_coords = 24, std::uint64_t seed = 7) {
  for (const Tensor& t : inputs) {
    t.node()->requires_grad = true;
    t.node()->grad.clear();
  }
  Tensor out = f();
  backward(out);
  GradCheckResult res;
  Rng rng(seed);
  double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
  for (const Tensor& t : inputs) {
    const std::vector<double> analytic = t.grad();
    std::vector<std::size_t> idx(t.numel());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (static_cast<int>(idx.size()) > max_coords) {
      for (std::size_t i = 0; i < static_cast<std::size_t>(max_coords); ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      }
      idx.resize(static_cast<std::size_t>(max_coords));
    }
    NoGradGuard guard;
    for (std::size_t i : idx) {
      double& v = t.node()->value[i];
      const double orig = v;
      v = orig + step;
      const double fp = f().item();
      v = orig - step;
      const double fm = f().item();
      v = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
      an2 += analytic[i] * analytic[i];
      nu2 += numeric * numeric;
      ++res.checked;
    }
  }
  res.analytic_norm = std::sqrt(an2);
  res.numeric_norm = std::sqrt(nu2);
  res.rel_error = std::sqrt(diff2) / std::max({res.analytic_norm, res.numeric_norm, 1e-12});
  return res;
}

}  // namespace warpfill
