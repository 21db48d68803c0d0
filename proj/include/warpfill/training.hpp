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


// Training loops: the W+ encoder against a frozen generator, then SVINet with
// a discriminator using the real-image re-warp strategy and synthetic pairs.

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/app/checkpoint.hpp"
#include "warpfill/core/optim.hpp"
#include "warpfill/encoder.hpp"
#include "warpfill/generator.hpp"
#include "warpfill/losses.hpp"
#include "warpfill/pipeline.hpp"
#include "warpfill/svinet.hpp"

namespace warpfill {

struct PoseSampling {
  double yaw_range = 0.6;
  double pitch_range = 0.3;

  void validate() const {
    if (!(yaw_range >= 0.0) || !(pitch_range >= 0.0) || pitch_range >= M_PI / 2) {
      throw std::invalid_argument("PoseSampling: ranges must be >= 0 and pitch below pi/2");
    }
  }
};

struct PoseAngles {
  double yaw = 0.0;
  double pitch = 0.0;
};

inline PoseAngles sample_pose_angles(Rng& rng, const PoseSampling& s) {
  PoseAngles a;
  a.yaw = rng.uniform(-s.yaw_range, s.yaw_range);
  a.pitch = rng.uniform(-s.pitch_range, s.pitch_range);
  return a;
}

// Orbit camera with yaw ~ U[-yaw_range, yaw_range] and pitch ~ U[-pitch_range, pitch_range].
inline Pose sample_novel_pose(Rng& rng, const PoseSampling& s, const PipelineConfig& cfg) {
  const PoseAngles a = sample_pose_angles(rng, s);
  return cfg.orbit(a.yaw, a.pitch);
}

struct Record {
  Image image;  // [1, 3, H, W]
  Pose pose;
};
using Dataset = std::vector<Record>;

// Generator-rendered stand-in for a real image collection: held-out latents
// rendered at sampled cameras.
inline Dataset make_synthetic_dataset(const Generator& gen, const PipelineConfig& cfg, int n, std::uint64_t seed,
                                      const PoseSampling& poses = {0.4, 0.2}) {
  if (n < 0) throw std::invalid_argument("make_synthetic_dataset: negative size");
  Rng rng(seed);
  NoGradGuard guard;
  Dataset out;
  for (int i = 0; i < n; ++i) {
    const LatentCode w = gen.sample_latent(rng);
    const Pose pose = sample_novel_pose(rng, poses, cfg);
    out.push_back({gen.render(w, {pose}, cfg.K, cfg.resolution, cfg.resolution, cfg.sampling).image.detach(), pose});
  }
  return out;
}

struct TrainConfig {
  int encoder_iterations = 20000;
  int svinet_iterations = 10000;
  int batch_size = 1;
  double lr_encoder = 1e-4;
  double lr_svinet = 1e-3;
  double lr_discriminator = 1e-4;
  int warmup_iterations = 200;  // linear learning-rate warmup of the SVINet optimizer
  OptimizerKind encoder_optimizer = OptimizerKind::kAdam;
  PoseSampling novel_poses;
  bool use_modulation = true;
  bool use_consistency_loss = true;
  bool use_symmetry = true;
  bool use_synth_data = true;
  int synth_pool = 64;
  double penalty_step = 1e-3;  // finite-difference step of the gradient-norm estimate
  std::uint64_t seed = 0;
  LossWeights weights;

  void validate() const {
    if (encoder_iterations <= 0 || svinet_iterations <= 0) throw std::invalid_argument("TrainConfig: iterations must be > 0");
    if (warmup_iterations < 0) throw std::invalid_argument("TrainConfig: warmup_iterations must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(lr_encoder > 0.0 && lr_svinet > 0.0 && lr_discriminator > 0.0)) {
      throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    }
    if (use_synth_data && synth_pool < 1) throw std::invalid_argument("TrainConfig: synth_pool must be >= 1");
    if (!(penalty_step > 0.0)) throw std::invalid_argument("TrainConfig: penalty_step must be > 0");
    novel_poses.validate();
    weights.validate();
  }
};

// Disables gradient tracking on a parameter set for the guard's lifetime.
class ScopedFreeze {
 public:
  explicit ScopedFreeze(const ParamSet& p) : p_(p) {
    for (const auto& e : p_.entries()) saved_.push_back(e.tensor.node()->requires_grad);
    p_.set_requires_grad(false);
  }
  ~ScopedFreeze() {
    for (std::size_t i = 0; i < saved_.size(); ++i) p_.entries()[i].tensor.node()->requires_grad = saved_[i];
  }
  ScopedFreeze(const ScopedFreeze&) = delete;
  ScopedFreeze& operator=(const ScopedFreeze&) = delete;

 private:
  const ParamSet& p_;
  std::vector<bool> saved_;
};

// Small convolutional real/fake classifier with probability output.
class Discriminator {
 public:
  explicit Discriminator(int image_size = 64, std::uint64_t seed = 5, int base = 16) : size_(image_size) {
    if (image_size < 16 || image_size % 16 != 0) throw std::invalid_argument("Discriminator: image size must be a multiple of 16");
    Rng rng(seed);
    const int ch[4] = {3, base, 2 * base, 2 * base};
    for (int i = 0; i < 3; ++i) {
      w_.push_back(params_.add_normal("disc.conv" + std::to_string(i) + ".w", {ch[i + 1], ch[i], 3, 3}, rng, 1.4));
      b_.push_back(params_.add("disc.conv" + std::to_string(i) + ".b", {ch[i + 1]}, 0.0));
    }
    fc_w_ = params_.add_normal("disc.fc.w", {1, ch[3] * 4}, rng, 1.0);
    fc_b_ = params_.add("disc.fc.b", {1}, 0.0);
  }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Logits bounded to (-30, 30) so probabilities stay strictly inside (0, 1).
  Tensor logits(const Image& x) const {
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != size_ || x.dim(3) != size_) {
      throw std::invalid_argument("Discriminator: expected [N,3," + std::to_string(size_) + "," + std::to_string(size_) +
                                  "], got " + shape_str(x.shape()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < w_.size(); ++i) h = leaky_relu(conv2d(h, w_[i], b_[i], 2));
    h = avg_pool(h, h.dim(2) / 2);
    const Tensor raw = linear(reshape(h, {x.dim(0), static_cast<int>(h.numel()) / x.dim(0)}), fc_w_, fc_b_);
    return scale(tanh(scale(reshape(raw, {x.dim(0)}), 1.0 / 30.0)), 30.0);
  }
  // D(x) in (0, 1), shape [N].
  Tensor operator()(const Image& x) const { return sigmoid(logits(x)); }

  // Per-sample estimate of ||grad_x D(x)||_2 from a central finite difference
  // along a random Gaussian direction u: E|u . g| = sqrt(2/pi) ||g||.
  // Differentiable in the discriminator parameters; exactly zero for a
  // constant discriminator.
  Tensor grad_norm_estimate(const Image& x, Rng& rng, double step) const {
    Tensor u = Tensor::zeros(x.shape());
    for (double& v : u.data()) v = rng.normal();
    const Tensor dp = (*this)(add(x, scale(u, step)));
    const Tensor dm = (*this)(sub(x, scale(u, step)));
    return scale(abs(sub(dp, dm)), std::sqrt(std::numbers::pi / 2.0) / (2.0 * step));
  }

 private:
  int size_;
  ParamSet params_;
  std::vector<Tensor> w_, b_;
  Tensor fc_w_, fc_b_;
};

// One discriminator update on real vs fake batches; returns the objective value.
inline double discriminator_step(Discriminator& d, Adam& opt, const Image& real, const Image& fake, const LossWeights& w,
                                 Rng& rng, double penalty_step) {
  opt.zero_grad();
  const Image fake_d = fake.detach();
  const Tensor loss = loss_adv_d(d(real), d(fake_d), d.grad_norm_estimate(real.detach(), rng, penalty_step), w.gamma,
                                 w.squared_r1);
  backward(loss);
  opt.step();
  return loss.item();
}

namespace detail {
inline Image concat_records(const Dataset& data, const std::vector<std::size_t>& idx, std::vector<Pose>& poses) {
  std::vector<Tensor> parts;
  poses.clear();
  for (std::size_t i : idx) {
    parts.push_back(data[i].image);
    poses.push_back(data[i].pose);
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

inline std::string config_snapshot(const TrainConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << c.seed << "\nbatch_size = " << c.batch_size << "\nlr_encoder = " << c.lr_encoder
     << "\nlr_svinet = " << c.lr_svinet << "\nwarmup_iterations = " << c.warmup_iterations << "\nlr_discriminator = " << c.lr_discriminator
     << "\nuse_modulation = " << c.use_modulation << "\nuse_symmetry = " << c.use_symmetry
     << "\nuse_consistency_loss = " << c.use_consistency_loss << "\nuse_synth_data = " << c.use_synth_data
     << "\nsynth_pool = " << c.synth_pool << "\ngamma = " << c.weights.gamma << "\n";
  return os.str();
}
}  // namespace detail

// Encoder training: encode -> render at the input camera -> W+ loss -> update.
class EncoderTrainer {
 public:
  EncoderTrainer(Encoder& enc, const Generator& gen, const Dataset& data, PipelineConfig pcfg, TrainConfig cfg,
                 LossExtractors ext = {})
      : enc_(enc),
        gen_(gen),
        data_(data),
        pcfg_(pcfg),
        cfg_(cfg),
        ext_(std::move(ext)),
        rng_(cfg.seed),
        opt_(enc.params().tensors(), cfg.lr_encoder, cfg.encoder_optimizer) {
    if (data_.empty()) throw std::invalid_argument("train_encoder: empty dataset");
    cfg_.validate();
    pcfg_.validate();
  }

  int iteration() const { return iteration_; }

  // Loss of a batch without updating anything.
  double evaluate(const std::vector<std::size_t>& idx) const {
    NoGradGuard guard;
    std::vector<Pose> poses;
    const Image img = detail::concat_records(data_, idx, poses);
    return loss_of(img, poses).item();
  }

  double step() {
    std::vector<std::size_t> idx;
    for (int b = 0; b < cfg_.batch_size; ++b) idx.push_back(rng_.below(data_.size()));
    std::vector<Pose> poses;
    const Image img = detail::concat_records(data_, idx, poses);
    ScopedFreeze freeze(gen_.params());
    opt_.zero_grad();
    const Tensor loss = loss_of(img, poses);
    backward(loss);
    opt_.step();
    ++iteration_;
    return loss.item();
  }

  std::vector<double> run(int iterations, const std::function<void(int, double)>& on_step = {}) {
    std::vector<double> history;
    for (int i = 0; i < iterations; ++i) {
      history.push_back(step());
      if (on_step) on_step(iteration_, history.back());
    }
    return history;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.kind = "encoder";
    ck.iteration = static_cast<std::uint64_t>(iteration_);
    ck.seed = cfg_.seed;
    ck.config = detail::config_snapshot(cfg_);
    ck.rng_state = rng_.state();
    ck.add_params(enc_.params());
    ck.add_all(opt_.state("opt"));
    return ck;
  }

  void restore(const Checkpoint& ck) {
    if (ck.kind != "encoder") throw std::runtime_error("EncoderTrainer: checkpoint kind is '" + ck.kind + "'");
    ck.load_params(enc_.params());
    opt_.load_state("opt", [&](const std::string& n) { return ck.values(n); });
    rng_.set_state(ck.rng_state);
    iteration_ = static_cast<int>(ck.iteration);
  }

 private:
  Tensor loss_of(const Image& img, const std::vector<Pose>& poses) const {
    const LatentCode w = enc_.encode(img);
    const RenderOutput r = gen_.render(w, poses, pcfg_.K, pcfg_.resolution, pcfg_.resolution, pcfg_.sampling);
    return loss_wplus(r.image, img, cfg_.weights, ext_);
  }

  Encoder& enc_;
  const Generator& gen_;
  const Dataset& data_;
  PipelineConfig pcfg_;
  TrainConfig cfg_;
  LossExtractors ext_;
  Rng rng_;
  Adam opt_;
  int iteration_ = 0;
};

inline std::vector<double> train_encoder(Encoder& enc, const Generator& gen, const Dataset& data,
                                         const PipelineConfig& pcfg, const TrainConfig& cfg,
                                         const std::function<void(int, double)>& on_step = {}) {
  EncoderTrainer t(enc, gen, data, pcfg, cfg);
  return t.run(cfg.encoder_iterations, on_step);
}

// Output of the real-image step: both inpainted views and their inputs.
struct RealStepOutput {
  WarpedView novel_view;
  WarpedView rewarp_view;
  Image novel;   // inpainted novel view
  Image rewarp;  // inpainted re-warp back at the input camera
};

// Forward flow to `novel` and reverse (re-warp) flow back to the source.
inline RealStepOutput svinet_step_real(const Models& m, const PipelineConfig& cfg, const SourceView& src,
                                       const std::vector<Pose>& novel) {
  RealStepOutput out;
  out.novel_view = prepare_novel_view(m, cfg, src, novel);
  out.rewarp_view = prepare_rewarp(cfg, src, out.novel_view);
  out.novel = m.inpaint(out.novel_view.initial, out.novel_view.mirror_initial, src.w);
  out.rewarp = m.inpaint(out.rewarp_view.initial, out.rewarp_view.mirror_initial, src.w);
  return out;
}

// A synthetic pair prepared up to the inpainting input.
struct SyntheticExample {
  SourceView source;  // I_s at c_s with E(I_s)
  WarpedView view;    // I_s warped to c_t with the ground-truth depth
  Image target;       // I_t
};

inline SyntheticExample prepare_synthetic_example(const Models& m, const PipelineConfig& cfg, const LatentCode& w_synth,
                                                  const Pose& c_s, const Pose& c_t) {
  const SyntheticPair pair =
      sample_synthetic_pair(*m.generator, w_synth, c_s, c_t, cfg.K, cfg.resolution, cfg.resolution, cfg.sampling);
  SyntheticExample ex;
  ex.source = encode_source(m, cfg, pair.source, {c_s});
  ex.view = prepare_novel_view(m, cfg, ex.source, {c_t}, pair.source_depth);
  ex.target = pair.target;
  return ex;
}

struct SynthStepOutput {
  Image inpainted;
  Tensor rec;
  Tensor consistency;
};

inline SynthStepOutput svinet_step_synth(const Models& m, const SyntheticExample& ex, const LossWeights& w,
                                         const LossExtractors& ext) {
  SynthStepOutput out;
  out.inpainted = m.inpaint(ex.view.initial, ex.view.mirror_initial, ex.source.w);
  out.rec = loss_rec(out.inpainted, ex.target, w, ext);
  out.consistency = loss_consistency(out.inpainted, ex.target, *m.encoder);
  return out;
}

struct SVINetStepLog {
  double total = 0.0, rec = 0.0, consistency = 0.0, adv = 0.0, disc = 0.0;
};

// SVINet + discriminator training. Every iteration carries one real-image
// step (forward + re-warp) and, unless disabled, one synthetic pair, grouped
// into a single total loss; the discriminator is updated afterwards.
class SVINetTrainer {
 public:
  SVINetTrainer(SVINet& net, Discriminator& disc, const Encoder& enc, const Generator& gen, const Dataset& data,
                PipelineConfig pcfg, TrainConfig cfg, LossExtractors ext = {})
      : net_(net),
        disc_(disc),
        enc_(enc),
        gen_(gen),
        data_(data),
        pcfg_(pcfg),
        cfg_(cfg),
        ext_(std::move(ext)),
        rng_(cfg.seed),
        opt_(net.params().tensors(), cfg.lr_svinet),
        opt_d_(disc.params().tensors(), cfg.lr_discriminator) {
    if (data_.empty()) throw std::invalid_argument("train_svinet: empty dataset");
    cfg_.validate();
    pcfg_.validate();
    net_.mutable_config().use_modulation = cfg_.use_modulation;
    net_.mutable_config().use_symmetry = cfg_.use_symmetry;
    models_.generator = &gen_;
    models_.encoder = &enc_;
    models_.svinet = &net_;
    for (const Record& r : data_) sources_.push_back(encode_source(models_, pcfg_, r.image, {r.pose}));
    if (cfg_.use_synth_data) {
      Rng pool_rng(cfg_.seed ^ 0x5bd1e995ULL);
      for (int i = 0; i < cfg_.synth_pool; ++i) {
        const LatentCode w = gen_.sample_latent(pool_rng);
        const Pose c_s = sample_novel_pose(pool_rng, cfg_.novel_poses, pcfg_);
        const Pose c_t = sample_novel_pose(pool_rng, cfg_.novel_poses, pcfg_);
        pool_.push_back(prepare_synthetic_example(models_, pcfg_, w, c_s, c_t));
      }
    }
  }

  int iteration() const { return iteration_; }
  const Models& models() const { return models_; }

  // Loss terms and images of one iteration's draw, without updates.
  struct Draw {
    std::size_t record = 0;
    Pose novel_pose;
    int synth = -1;
  };

  Draw draw() {
    Draw d;
    d.record = rng_.below(data_.size());
    d.novel_pose = sample_novel_pose(rng_, cfg_.novel_poses, pcfg_);
    if (cfg_.use_synth_data) d.synth = static_cast<int>(rng_.below(pool_.size()));
    return d;
  }

  SVINetLossTerms losses(const Draw& d, SVINetLossInputs* inputs_out = nullptr) const {
    const SourceView& src = sources_[d.record];
    const RealStepOutput real = svinet_step_real(models_, pcfg_, src, {d.novel_pose});
    SVINetLossInputs in;
    in.novel = real.novel;
    in.rewarp = real.rewarp;
    in.real = src.image;
    if (d.synth >= 0) {
      const SyntheticExample& ex = pool_[static_cast<std::size_t>(d.synth)];
      in.synth = models_.inpaint(ex.view.initial, ex.view.mirror_initial, ex.source.w);
      in.synth_target = ex.target;
    }
    ScopedFreeze fe(enc_.params());
    ScopedFreeze fd(disc_.params());
    const Discriminator& disc = disc_;
    SVINetLossTerms t = loss_svinet_total(in, cfg_.weights, ext_, enc_, [&disc](const Image& x) { return disc(x); },
                                          cfg_.use_consistency_loss);
    if (inputs_out) *inputs_out = in;
    return t;
  }

  SVINetStepLog step() {
    const Draw d = draw();
    SVINetLossInputs in;
    opt_.zero_grad();
    const SVINetLossTerms t = losses(d, &in);
    backward(t.total);
    opt_.set_lr(cfg_.warmup_iterations > 0
                    ? cfg_.lr_svinet * std::min(1.0, (iteration_ + 1.0) / cfg_.warmup_iterations)
                    : cfg_.lr_svinet);
    opt_.step();
    SVINetStepLog log{t.total.item(), t.rec.item(), t.consistency.item(), t.adv.item(), 0.0};
    if (cfg_.weights.lambda_adv != 0.0) {
      const Image real = in.synth_target.defined() ? concat({in.real, in.synth_target}, 0) : in.real;
      const SVINetLossGroups g = svinet_loss_groups(in);
      log.disc = discriminator_step(disc_, opt_d_, real, g.adv_fake, cfg_.weights, rng_, cfg_.penalty_step);
    }
    ++iteration_;
    return log;
  }

  std::vector<SVINetStepLog> run(int iterations, const std::function<void(int, const SVINetStepLog&)>& on_step = {}) {
    std::vector<SVINetStepLog> history;
    for (int i = 0; i < iterations; ++i) {
      history.push_back(step());
      if (on_step) on_step(iteration_, history.back());
    }
    return history;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck;
    ck.kind = "svinet";
    ck.iteration = static_cast<std::uint64_t>(iteration_);
    ck.seed = cfg_.seed;
    ck.config = detail::config_snapshot(cfg_);
    ck.rng_state = rng_.state();
    ck.add_params(net_.params());
    ck.add_params(disc_.params());
    ck.add_all(opt_.state("opt"));
    ck.add_all(opt_d_.state("opt_d"));
    return ck;
  }

  void restore(const Checkpoint& ck) {
    if (ck.kind != "svinet") throw std::runtime_error("SVINetTrainer: checkpoint kind is '" + ck.kind + "'");
    ck.load_params(net_.params());
    ck.load_params(disc_.params());
    opt_.load_state("opt", [&](const std::string& n) { return ck.values(n); });
    opt_d_.load_state("opt_d", [&](const std::string& n) { return ck.values(n); });
    rng_.set_state(ck.rng_state);
    iteration_ = static_cast<int>(ck.iteration);
  }

 private:
  SVINet& net_;
  Discriminator& disc_;
  const Encoder& enc_;
  const Generator& gen_;
  const Dataset& data_;
  PipelineConfig pcfg_;
  TrainConfig cfg_;
  LossExtractors ext_;
  Rng rng_;
  Adam opt_, opt_d_;
  Models models_;
  std::vector<SourceView> sources_;
  std::vector<SyntheticExample> pool_;
  int iteration_ = 0;
};

inline std::vector<SVINetStepLog> train_svinet(SVINet& net, Discriminator& disc, const Encoder& enc,
                                               const Generator& gen, const Dataset& data, const PipelineConfig& pcfg,
                                               const TrainConfig& cfg,
                                               const std::function<void(int, const SVINetStepLog&)>& on_step = {}) {
  SVINetTrainer t(net, disc, enc, gen, data, pcfg, cfg);
  return t.run(cfg.svinet_iterations, on_step);
}

}  // namespace warpfill
