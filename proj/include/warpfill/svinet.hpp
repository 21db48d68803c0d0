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


// Style-based novel-view inpainting network.
//
//   N_E: three strided convolutions applied to both the initial image and its
//        mirrored counterpart;
//   FiLM: F_r = phi_s([F, F_mirror]) * F + phi_t([F, F_mirror]);
//   N_I: residual blocks of two fast Fourier convolutions each, local/global
//        channel split, every convolution style-modulated by w+;
//   N_D: upsampling modulated convolutions and a final projection to RGB.

#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/fft.hpp"
#include "warpfill/core/nn.hpp"
#include "warpfill/core/ops.hpp"
#include "warpfill/core/params.hpp"
#include "warpfill/core/rng.hpp"
#include "warpfill/generator.hpp"

namespace warpfill {

using FeatureMap = Tensor;  // [N, C, H, W]

struct SVINetConfig {
  int image_size = 64;
  int base_channels = 16;
  int n_down = 3;
  int n_blocks = 4;
  int n_up = 3;
  double demod_eps = 1e-8;
  double global_ratio = 0.25;  // share of N_I channels in the spectral (global) path
  int levels = 8;
  int latent_dim = 64;
  double affine_gain = 0.5;
  bool use_modulation = true;
  bool use_symmetry = true;
  bool spectral_activation = true;

  int feature_channels() const { return base_channels << (n_down - 1); }
  int global_channels() const { return static_cast<int>(std::lround(feature_channels() * global_ratio)); }
  int local_channels() const { return feature_channels() - global_channels(); }

  void validate() const {
    if (n_down != n_up) throw std::invalid_argument("SVINetConfig: n_down must equal n_up");
    if (n_down < 1 || n_blocks < 0 || base_channels < 1) throw std::invalid_argument("SVINetConfig: invalid sizes");
    if (!(demod_eps > 0.0)) throw std::invalid_argument("SVINetConfig: demod_eps must be positive");
    if (image_size % (1 << n_down) != 0 || ((image_size >> n_down) % 2) != 0) {
      throw std::invalid_argument("SVINetConfig: image_size / 2^n_down must be even");
    }
    if (global_channels() < 2 || global_channels() % 2 != 0 || local_channels() < 1) {
      throw std::invalid_argument("SVINetConfig: channel split must leave an even global part >= 2 and a local part");
    }
  }
};

// A convolution whose weights are modulated by the style of one latent level.
struct ModConv {
  Tensor weight;    // [Co, Ci, k, k]
  Tensor bias;      // [Co] or undefined
  Tensor affine_w;  // [Ci, d]
  Tensor affine_b;  // [Ci]
  int level = 0;
};

// FiLM fusion of main and mirror features.
struct FiLM {
  Tensor scale_w, scale_b, shift_w, shift_b;

  FiLM() = default;
  FiLM(ParamSet& params, const std::string& prefix, int channels, Rng& rng) {
    scale_w = params.add_normal(prefix + ".scale.w", {channels, 2 * channels, 3, 3}, rng, 0.1);
    scale_b = params.add(prefix + ".scale.b", {channels}, 1.0);
    shift_w = params.add_normal(prefix + ".shift.w", {channels, 2 * channels, 3, 3}, rng, 0.1);
    shift_b = params.add(prefix + ".shift.b", {channels}, 0.0);
  }

  // F_r = F_s * F + F_t with (F_s, F_t) predicted from [F, F_mirror].
  FeatureMap fuse(const FeatureMap& f, const FeatureMap& f_mirror) const {
    if (f.shape() != f_mirror.shape()) {
      throw std::invalid_argument("film_fuse: feature shapes " + shape_str(f.shape()) + " and " +
                                  shape_str(f_mirror.shape()) + " differ");
    }
    const Tensor both = concat({f, f_mirror}, 1);
    return add(mul(conv2d(both, scale_w, scale_b), f), conv2d(both, shift_w, shift_b));
  }
};

class SVINet {
 public:
  explicit SVINet(SVINetConfig cfg = {}, std::uint64_t seed = 3) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    int in = 3;
    for (int i = 0; i < cfg_.n_down; ++i) {
      const int out = cfg_.base_channels << i;
      const std::string p = "svi.enc" + std::to_string(i);
      enc_w_.push_back(params_.add_normal(p + ".w", {out, in, 3, 3}, rng, 1.4));
      enc_b_.push_back(params_.add(p + ".b", {out}, 0.0));
      in = out;
    }
    const int fc = cfg_.feature_channels(), cl = cfg_.local_channels(), cg = cfg_.global_channels();
    film_ = FiLM(params_, "svi.film", fc, rng);
    for (int b = 0; b < cfg_.n_blocks; ++b) {
      Block blk;
      for (int f = 0; f < 2; ++f) {
        const std::string p = "svi.block" + std::to_string(b) + ".ffc" + std::to_string(f);
        Ffc& ffc = blk.ffc[f];
        ffc.l2l = make_conv(p + ".l2l", cl, cl, 3, true, rng);
        ffc.g2l = make_conv(p + ".g2l", cl, cg, 3, false, rng);
        ffc.l2g = make_conv(p + ".l2g", cg, cl, 3, true, rng);
        ffc.g_down = make_conv(p + ".g_down", cg / 2, cg, 1, true, rng);
        ffc.g_fourier = make_conv(p + ".g_fourier", cg, cg, 1, false, rng);
        ffc.g_up = make_conv(p + ".g_up", cg, cg / 2, 1, false, rng);
      }
      blocks_.push_back(blk);
    }
    in = fc;
    for (int i = 0; i < cfg_.n_up; ++i) {
      const int out = std::max(cfg_.base_channels, fc >> (i + 1));
      up_.push_back(make_conv("svi.up" + std::to_string(i), out, in, 3, true, rng));
      in = out;
    }
    out_w_ = params_.add_normal("svi.out.w", {3, in, 1, 1}, rng, 1.0);
    out_b_ = params_.add("svi.out.b", {3}, 0.0);
    // Monotone depth -> level assignment.
    register_modconvs();
    const int n_mod = static_cast<int>(modconvs_.size());
    for (int i = 0; i < n_mod; ++i) modconvs_[i]->level = std::min(cfg_.levels - 1, i * cfg_.levels / n_mod);
  }

  SVINet(const SVINet&) = delete;
  SVINet& operator=(const SVINet&) = delete;

  const SVINetConfig& config() const { return cfg_; }
  SVINetConfig& mutable_config() { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  FiLM& film() { return film_; }
  int modulated_conv_count() const { return static_cast<int>(modconvs_.size()); }
  std::vector<int> conv_levels() const {
    std::vector<int> out;
    for (const ModConv* m : modconvs_) out.push_back(m->level);
    return out;
  }

  // N_E: [N, 3, S, S] -> [N, F, S / 2^n_down, S / 2^n_down].
  FeatureMap extract_features(const Image& image) const {
    if (image.rank() != 4 || image.dim(1) != 3 || image.dim(2) != cfg_.image_size || image.dim(3) != cfg_.image_size) {
      throw std::invalid_argument("SVINet: expected [N,3," + std::to_string(cfg_.image_size) + "," +
                                  std::to_string(cfg_.image_size) + "] input, got " + shape_str(image.shape()));
    }
    Tensor x = image;
    for (std::size_t i = 0; i < enc_w_.size(); ++i) x = leaky_relu(conv2d(x, enc_w_[i], enc_b_[i], 2));
    return x;
  }

  FeatureMap film_fuse(const FeatureMap& f, const FeatureMap& f_mirror) const { return film_.fuse(f, f_mirror); }

  // Style code s = A(w+[level]) for one modulated convolution; all ones when
  // modulation is disabled.
  Tensor style(const ModConv& m, const LatentCode& w) const {
    const int n = w.dim(0);
    if (!cfg_.use_modulation) return Tensor::full({n, m.weight.dim(1)}, 1.0);
    const Tensor lw = reshape(slice(w, 1, m.level, 1), {n, cfg_.latent_dim});
    return linear(lw, m.affine_w, m.affine_b);
  }

  Tensor apply(const ModConv& m, const Tensor& x, const LatentCode& w) const {
    return modulated_conv2d(x, m.weight, m.bias, style(m, w), cfg_.demod_eps);
  }

  // Fourier unit: real DFT -> modulated 1x1 conv over [re; im] -> (activation) -> inverse DFT.
  FeatureMap spectral_transform(const FeatureMap& f, const LatentCode& w, const ModConv& conv) const {
    if (f.dim(2) % 2 != 0 || f.dim(3) % 2 != 0) {
      throw std::invalid_argument("spectral_transform: spatial size " + shape_str(f.shape()) + " must be even");
    }
    Tensor y = apply(conv, rfft2(f), w);
    if (cfg_.spectral_activation) y = leaky_relu(y);
    return irfft2(y, f.dim(3));
  }

  // One residual block of two FFCs on x = [local; global] channels.
  FeatureMap ffc_block(const FeatureMap& x, const LatentCode& w, int block) const {
    const int cl = cfg_.local_channels(), cg = cfg_.global_channels();
    if (x.rank() != 4 || x.dim(1) != cl + cg) {
      throw std::invalid_argument("ffc_block: expected " + std::to_string(cl + cg) + " channels, got " + shape_str(x.shape()));
    }
    Tensor l = slice(x, 1, 0, cl), g = slice(x, 1, cl, cg);
    for (const Ffc& f : blocks_.at(static_cast<std::size_t>(block)).ffc) {
      Tensor h = leaky_relu(apply(f.g_down, g, w));
      Tensor global = apply(f.g_up, add(h, spectral_transform(h, w, f.g_fourier)), w);
      Tensor nl = leaky_relu(add(apply(f.l2l, l, w), apply(f.g2l, g, w)));
      Tensor ng = leaky_relu(add(apply(f.l2g, l, w), global));
      l = nl;
      g = ng;
    }
    return add(x, concat({l, g}, 1));
  }

  // Full network: N_E on both inputs -> FiLM -> N_I -> N_D.
  Image inpaint(const Image& initial, const Image& mirror_initial, const LatentCode& w) const {
    if (initial.shape() != mirror_initial.shape()) {
      throw std::invalid_argument("inpaint: initial and mirror inputs must share a shape");
    }
    if (w.rank() != 3 || w.dim(0) != initial.dim(0) || w.dim(1) != cfg_.levels || w.dim(2) != cfg_.latent_dim) {
      throw std::invalid_argument("inpaint: latent shape " + shape_str(w.shape()) + " does not match config");
    }
    const FeatureMap f = extract_features(initial);
    const Image mirror = cfg_.use_symmetry ? mirror_initial : Tensor::zeros(mirror_initial.shape());
    Tensor x = film_fuse(f, extract_features(mirror));
    for (int b = 0; b < cfg_.n_blocks; ++b) x = ffc_block(x, w, b);
    for (const ModConv& m : up_) x = leaky_relu(apply(m, upsample2x(x), w));
    return tanh(conv2d(x, out_w_, out_b_));
  }

  // Access to modulated convolutions for tests and tooling.
  const ModConv& fourier_conv(int block, int ffc) const { return blocks_.at(block).ffc[ffc].g_fourier; }

 private:
  struct Ffc {
    ModConv l2l, g2l, l2g, g_down, g_fourier, g_up;
  };
  struct Block {
    Ffc ffc[2];
  };

  ModConv make_conv(const std::string& name, int co, int ci, int k, bool bias, Rng& rng) {
    ModConv m;
    m.weight = params_.add_normal(name + ".w", {co, ci, k, k}, rng, 1.0);
    if (bias) m.bias = params_.add(name + ".b", {co}, 0.0);
    m.affine_w = params_.add_normal(name + ".affine.w", {ci, cfg_.latent_dim}, rng, cfg_.affine_gain);
    m.affine_b = params_.add(name + ".affine.b", {ci}, 1.0);
    return m;
  }

  void register_modconvs() {
    modconvs_.clear();
    for (Block& b : blocks_) {
      for (Ffc& f : b.ffc) {
        for (ModConv* m : {&f.l2l, &f.g2l, &f.l2g, &f.g_down, &f.g_fourier, &f.g_up}) modconvs_.push_back(m);
      }
    }
    for (ModConv& m : up_) modconvs_.push_back(&m);
  }

  SVINetConfig cfg_;
  ParamSet params_;
  std::vector<Tensor> enc_w_, enc_b_;
  FiLM film_;
  std::vector<Block> blocks_;
  std::vector<ModConv> up_;
  Tensor out_w_, out_b_;
  std::vector<ModConv*> modconvs_;
};

}  // namespace warpfill
