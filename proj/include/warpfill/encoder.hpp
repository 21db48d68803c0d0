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


// Inversion encoder: a strided-convolution feature pyramid whose coarse, mid
// and fine scales feed the low, middle and high levels of a W+ code.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/nn.hpp"
#include "warpfill/core/ops.hpp"
#include "warpfill/core/params.hpp"
#include "warpfill/core/rng.hpp"
#include "warpfill/generator.hpp"

namespace warpfill {

struct EncoderConfig {
  int image_size = 64;
  int levels = 8;
  int latent_dim = 64;
  int base_channels = 16;  // channels of the fine scale; doubled per stage
  int pooled = 4;          // each head pools its scale to pooled x pooled
  // Level split: [0, coarse_levels) from coarse, [coarse, coarse + mid) from mid, rest from fine.
  int coarse_levels = 4;
  int mid_levels = 2;
  double head_gain = 0.1;

  void validate() const {
    if (image_size < 8 * pooled || image_size % 8 != 0) {
      throw std::invalid_argument("EncoderConfig: image_size must be a multiple of 8 and >= 8 * pooled");
    }
    if (coarse_levels < 1 || mid_levels < 1 || coarse_levels + mid_levels >= levels) {
      throw std::invalid_argument("EncoderConfig: level split must leave every scale at least one level");
    }
  }
  static EncoderConfig for_generator(const GeneratorConfig& g, int image_size = 64) {
    EncoderConfig c;
    c.image_size = image_size;
    c.levels = g.levels;
    c.latent_dim = g.latent_dim;
    c.coarse_levels = std::max(1, g.levels / 2);
    c.mid_levels = std::max(1, g.levels / 4);
    if (c.coarse_levels + c.mid_levels >= c.levels) c.coarse_levels = c.levels - c.mid_levels - 1;
    return c;
  }
};

// Feature maps at three scales, finest first: [N, b, S/2], [N, 2b, S/4], [N, 4b, S/8].
struct FeaturePyramid {
  Tensor fine, mid, coarse;
};

class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg = {}, std::uint64_t seed = 2) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    int in = 3;
    for (int s = 0; s < 3; ++s) {
      const int out = cfg_.base_channels << s;
      const std::string p = "enc.stage" + std::to_string(s);
      Stage st;
      st.down_w = params_.add_normal(p + ".down.w", {out, in, 3, 3}, rng, 1.4);
      st.down_b = params_.add(p + ".down.b", {out}, 0.0);
      st.conv_w = params_.add_normal(p + ".conv.w", {out, out, 3, 3}, rng, 1.4);
      st.conv_b = params_.add(p + ".conv.b", {out}, 0.0);
      stages_.push_back(st);
      in = out;
    }
    const int pp = cfg_.pooled * cfg_.pooled;
    const int counts[3] = {cfg_.levels - cfg_.coarse_levels - cfg_.mid_levels, cfg_.mid_levels, cfg_.coarse_levels};
    const char* names[3] = {"fine", "mid", "coarse"};
    for (int s = 0; s < 3; ++s) {
      const int ch = cfg_.base_channels << s;
      const std::string p = std::string("enc.head.") + names[s];
      heads_w_[s] = params_.add_normal(p + ".w", {counts[s] * cfg_.latent_dim, ch * pp}, rng, cfg_.head_gain);
      heads_b_[s] = params_.add(p + ".b", {counts[s] * cfg_.latent_dim}, 0.0);
    }
    w_avg_ = params_.add("enc.w_avg", {1, cfg_.levels, cfg_.latent_dim}, 0.0);
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  FeaturePyramid features(const Image& image) const {
    if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg_.image_size || image.dim(3) != cfg_.image_size) {
      throw std::invalid_argument("Encoder: expected [N,3," + std::to_string(cfg_.image_size) + "," +
                                  std::to_string(cfg_.image_size) + "] image, got " + shape_str(image.shape()));
    }
    Tensor x = image;
    Tensor out[3];
    for (int s = 0; s < 3; ++s) {
      x = leaky_relu(conv2d(x, stages_[s].down_w, stages_[s].down_b, 2));
      x = leaky_relu(conv2d(x, stages_[s].conv_w, stages_[s].conv_b, 1));
      out[s] = x;
    }
    return {out[0], out[1], out[2]};
  }

  // E(I) -> w+ [N, L, d].
  LatentCode encode(const Image& image) const {
    const FeaturePyramid f = features(image);
    const int n = image.dim(0);
    const Tensor maps[3] = {f.fine, f.mid, f.coarse};
    std::vector<Tensor> parts(3);
    for (int s = 0; s < 3; ++s) {
      const Tensor& m = maps[s];
      const Tensor pooled = avg_pool(m, m.dim(2) / cfg_.pooled);
      const Tensor flat = reshape(pooled, {n, static_cast<int>(pooled.numel()) / n});
      const Tensor code = linear(flat, heads_w_[s], heads_b_[s]);
      parts[s] = reshape(code, {n, heads_b_[s].dim(0) / cfg_.latent_dim, cfg_.latent_dim});
    }
    // Low levels come from the coarse scale, high levels from the fine scale.
    Tensor w = concat({parts[2], parts[1], parts[0]}, 1);
    std::vector<Tensor> avg(static_cast<std::size_t>(n), w_avg_);
    return add(w, n == 1 ? w_avg_ : concat(avg, 0));
  }

 private:
  struct Stage {
    Tensor down_w, down_b, conv_w, conv_b;
  };
  EncoderConfig cfg_;
  ParamSet params_;
  std::vector<Stage> stages_;
  Tensor heads_w_[3], heads_b_[3];
  Tensor w_avg_;
};

}  // namespace warpfill
