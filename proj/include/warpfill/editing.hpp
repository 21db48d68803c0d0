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


// Optimisation-based refinement and editing: latent + noise inversion,
// multi-view pseudo-supervised generator fine-tuning (pivotal tuning),
// attribute editing along a latent direction, and reference-style synthesis.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/optim.hpp"
#include "warpfill/generator.hpp"
#include "warpfill/losses.hpp"
#include "warpfill/pipeline.hpp"
#include "warpfill/training.hpp"

namespace warpfill {

class OptimizationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptConfig {
  int inversion_steps = 500;
  int tuning_steps = 300;
  double lambda_n = 1e3;
  double lambda_mv = 1.0;
  double lambda2_g = 1.0;
  double lambda_lpips_g = 1.0;
  int n_pseudo_views = 4;
  double lr_latent = 1e-2;
  double lr_generator = 1e-3;
  double backoff = 0.5;  // learning-rate factor applied when an iterate is rejected
  PoseSampling pseudo_poses;
  std::uint64_t seed = 0;

  void validate() const {
    if (inversion_steps < 0 || tuning_steps < 0 || n_pseudo_views < 0) {
      throw std::invalid_argument("OptConfig: step and view counts must be >= 0");
    }
    for (double v : {lambda_n, lambda_mv, lambda2_g, lambda_lpips_g}) {
      if (!(v >= 0.0)) throw std::invalid_argument("OptConfig: loss weights must be >= 0");
    }
    if (!(lr_latent > 0.0 && lr_generator > 0.0)) throw std::invalid_argument("OptConfig: learning rates must be > 0");
    if (!(backoff > 0.0 && backoff < 1.0)) throw std::invalid_argument("OptConfig: backoff must lie in (0, 1)");
    pseudo_poses.validate();
  }
};

// Noise regulariser: mean square of the entries plus, at every scale down to
// 8x8 (2x average pooling between scales), the squared lag-1 autocorrelation
// along both spatial axes.
inline Tensor noise_regularizer(const NoiseInput& noise) {
  if (noise.rank() != 4) throw std::invalid_argument("noise_regularizer: expected [N, P, R, R] noise");
  Tensor total = mean(square(noise));
  Tensor n = noise;
  while (true) {
    const int h = n.dim(2), w = n.dim(3);
    if (h < 2 || w < 2) break;
    const Tensor right = concat({slice(n, 3, 1, w - 1), slice(n, 3, 0, 1)}, 3);
    const Tensor down = concat({slice(n, 2, 1, h - 1), slice(n, 2, 0, 1)}, 2);
    total = add(total, add(square(mean(mul(n, right))), square(mean(mul(n, down)))));
    if (h <= 8 || w <= 8 || h % 2 || w % 2) break;
    n = avg_pool(n, 2);
  }
  return total;
}

struct InversionResult {
  LatentCode w;
  NoiseInput noise;
  std::vector<double> history;  // objective of every evaluated iterate
  double initial_loss = 0.0;
  double final_loss = 0.0;       // objective at the returned (best) iterate
  double initial_mse = 0.0;
  double final_mse = 0.0;
  int accepted = 0;
};

namespace detail {
inline void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw OptimizationFailure(std::string(what) + ": objective became non-finite");
}
}  // namespace detail

// Joint optimisation of (w, n) for MSE(R(G(w, n), c), I) + lambda_n L_n(n).
// Iterates that do not improve the objective are rejected: the best iterate
// is restored and the learning rate multiplied by `backoff`.
inline InversionResult invert(const Image& image, const Pose& pose, const Generator& gen, const PipelineConfig& pcfg,
                              const OptConfig& cfg, const LatentCode& w_init, const NoiseInput& n_init = Tensor()) {
  cfg.validate();
  if (image.rank() != 4 || image.dim(0) != 1) throw std::invalid_argument("invert: expects a single [1,3,H,W] image");
  ScopedFreeze freeze(gen.params());
  Tensor w = w_init.clone(true);
  Tensor n = (n_init.defined() ? n_init : gen.default_noise(1)).clone(true);
  Adam opt({w, n}, cfg.lr_latent);
  const Image target = image.detach();
  auto objective = [&](double* mse_out) {
    const RenderOutput r = gen.render(w, {pose}, pcfg.K, pcfg.resolution, pcfg.resolution, pcfg.sampling, n);
    const Tensor m = mse(r.image, target);
    if (mse_out) *mse_out = m.item();
    return add(m, scale(noise_regularizer(n), cfg.lambda_n));
  };
  InversionResult res;
  std::vector<double> best_w = w.data(), best_n = n.data();
  double best = 0.0, best_mse = 0.0;
  for (int it = 0; it <= cfg.inversion_steps; ++it) {
    opt.zero_grad();
    double m = 0.0;
    const Tensor loss = objective(&m);
    const double v = loss.item();
    detail::check_finite(v, "invert");
    res.history.push_back(v);
    if (it == 0) {
      res.initial_loss = best = v;
      res.initial_mse = best_mse = m;
    } else if (v <= best) {
      best = v;
      best_mse = m;
      best_w = w.data();
      best_n = n.data();
      ++res.accepted;
    } else {
      w.data() = best_w;
      n.data() = best_n;
      opt.set_lr(opt.lr() * cfg.backoff);
      continue;
    }
    if (it == cfg.inversion_steps || v == 0.0) break;
    backward(loss);
    opt.step();
  }
  res.w = Tensor::from(w.shape(), best_w);
  res.noise = Tensor::from(n.shape(), best_n);
  res.final_loss = best;
  res.final_mse = best_mse;
  return res;
}

struct PseudoView {
  Image image;
  Pose pose;
};

// N novel views of the input synthesised by the full warp + inpaint flow.
inline std::vector<PseudoView> multiview_set(const Image& image, const Pose& pose, const Models& m,
                                             const PipelineConfig& pcfg, const OptConfig& cfg) {
  cfg.validate();
  std::vector<PseudoView> out;
  if (cfg.n_pseudo_views == 0) return out;
  const SourceView src = encode_source(m, pcfg, image, {pose});
  Rng rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
  NoGradGuard guard;
  while (static_cast<int>(out.size()) < cfg.n_pseudo_views) {
    const Pose c = sample_novel_pose(rng, cfg.pseudo_poses, pcfg);
    if ((c.R - pose.R).cwiseAbs().maxCoeff() < 1e-9 && (c.t - pose.t).cwiseAbs().maxCoeff() < 1e-9) continue;
    out.push_back({synthesize_views(m, pcfg, src, {c}).detach(), c});
  }
  return out;
}

struct TuningResult {
  std::vector<double> history;
  double initial_input_loss = 0.0;  // input-view L_G before tuning
  double final_input_loss = 0.0;    // input-view L_G at the returned parameters
  int accepted = 0;
};

// Generator loss of one view: lambda2 * MSE + lambda_lpips * perceptual.
inline Tensor generator_view_loss(const Image& render, const Image& target, const OptConfig& cfg,
                                  const LossExtractors& ext) {
  Tensor l = scale(mse(render, target), cfg.lambda2_g);
  if (cfg.lambda_lpips_g != 0.0) l = add(l, scale(ext.perceptual->distance(render, target), cfg.lambda_lpips_g));
  return l;
}

// Fine-tunes the generator parameters for the frozen (w, n) on the input view
// plus lambda_mv times the pseudo-views. Rejected iterates restore the best
// parameters and back off the learning rate.
inline TuningResult pivotal_tune(Generator& gen, const LatentCode& w_opt, const NoiseInput& noise, const Image& image,
                                 const Pose& pose, const std::vector<PseudoView>& views, const PipelineConfig& pcfg,
                                 const OptConfig& cfg, const LossExtractors& ext = {}) {
  cfg.validate();
  const LatentCode w = w_opt.detach();
  const NoiseInput n = (noise.defined() ? noise : gen.default_noise(1)).detach();
  std::vector<Pose> poses{pose};
  std::vector<Tensor> targets{image.detach()};
  for (const PseudoView& v : views) {
    poses.push_back(v.pose);
    targets.push_back(v.image.detach());
  }
  const int nv = static_cast<int>(poses.size());
  Adam opt(gen.params().tensors(), cfg.lr_generator);
  auto objective = [&](double* input_loss) {
    // One tri-plane shared by every view.
    const TriPlane planes = gen.generate_triplane(w, n);
    const TriPlane batch = nv == 1 ? planes : concat(std::vector<Tensor>(static_cast<std::size_t>(nv), planes), 0);
    const RenderOutput r = gen.render_planes(batch, poses, pcfg.K, pcfg.resolution, pcfg.resolution, pcfg.sampling);
    const Tensor li = generator_view_loss(slice(r.image, 0, 0, 1), targets[0], cfg, ext);
    if (input_loss) *input_loss = li.item();
    Tensor total = li;
    for (int i = 1; i < nv; ++i) {
      total = add(total, scale(generator_view_loss(slice(r.image, 0, i, 1), targets[i], cfg, ext), cfg.lambda_mv));
    }
    return total;
  };
  TuningResult res;
  auto best_params = gen.params().snapshot();
  double best = 0.0, best_input = 0.0;
  for (int it = 0; it <= cfg.tuning_steps; ++it) {
    opt.zero_grad();
    double li = 0.0;
    const Tensor loss = objective(&li);
    const double v = loss.item();
    detail::check_finite(v, "pivotal_tune");
    res.history.push_back(v);
    if (it == 0) {
      best = v;
      res.initial_input_loss = best_input = li;
    } else if (v <= best) {
      best = v;
      best_input = li;
      best_params = gen.params().snapshot();
      ++res.accepted;
    } else {
      gen.params().restore(best_params);
      opt.set_lr(opt.lr() * cfg.backoff);
      continue;
    }
    if (it == cfg.tuning_steps) break;
    backward(loss);
    opt.step();
  }
  gen.params().restore(best_params);
  gen.params().zero_grad();
  res.final_input_loss = best_input;
  return res;
}

struct EditDirection {
  LatentCode direction;  // [1, L, d]
  double alpha = 0.0;
};

// R(G(w_opt + alpha * n_att), c_novel).
inline Image edit(const LatentCode& w_opt, const EditDirection& dir, const Pose& c_novel, const Generator& gen,
                  const PipelineConfig& pcfg, const NoiseInput& noise = Tensor()) {
  if (dir.direction.shape() != w_opt.shape()) {
    throw std::invalid_argument("edit: direction shape " + shape_str(dir.direction.shape()) + " does not match code " +
                                shape_str(w_opt.shape()));
  }
  NoGradGuard guard;
  const LatentCode w = add(w_opt, scale(dir.direction, dir.alpha));
  return gen.render(w, {c_novel}, pcfg.K, pcfg.resolution, pcfg.resolution, pcfg.sampling, noise).image.detach();
}

}  // namespace warpfill
