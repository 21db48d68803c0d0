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


// Training objectives: the W+ encoder loss, the SVINet reconstruction,
// latent-consistency and adversarial losses, and their weighted total.
//
// Perceptual and identity terms are computed by pluggable extractors; the
// defaults are fixed random-weight convolution stacks (deterministic seed).

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/nn.hpp"
#include "warpfill/core/ops.hpp"
#include "warpfill/core/rng.hpp"
#include "warpfill/encoder.hpp"
#include "warpfill/generator.hpp"

namespace warpfill {

struct LossWeights {
  // Encoder objective: MSE, perceptual, identity.
  double lambda_mse = 1.0;
  double lambda_lpips = 0.8;
  double lambda_id_wplus = 0.1;
  // Reconstruction objective: MAE, perceptual, identity.
  double lambda_l1 = 10.0;
  double lambda_p = 30.0;
  double lambda_id = 0.1;
  // SVINet total: reconstruction, latent consistency, adversarial.
  double lambda_rec = 1.0;
  double lambda_c = 0.1;
  double lambda_adv = 10.0;
  // Gradient-penalty weight of the discriminator objective.
  double gamma = 10.0;
  bool squared_r1 = false;

  void validate() const {
    for (double v : {lambda_mse, lambda_lpips, lambda_id_wplus, lambda_l1, lambda_p, lambda_id, lambda_rec, lambda_c,
                     lambda_adv, gamma}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
    }
  }
};

// Fixed multi-layer image features; distance() is a perceptual dissimilarity.
class PerceptualExtractor {
 public:
  virtual ~PerceptualExtractor() = default;
  virtual std::vector<Tensor> features(const Image& image) const = 0;
  // Mean over layers of the per-element mean squared feature difference.
  virtual Tensor distance(const Image& a, const Image& b) const {
    const std::vector<Tensor> fa = features(a), fb = features(b);
    Tensor total = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < fa.size(); ++i) total = add(total, mse(fa[i], fb[i]));
    return scale(total, 1.0 / static_cast<double>(fa.size()));
  }
};

// Fixed map to unit-norm embeddings [N, E].
class IdentityEmbedder {
 public:
  virtual ~IdentityEmbedder() = default;
  virtual Tensor embed(const Image& image) const = 0;
  // Cosine similarity per sample, [N].
  Tensor similarity(const Image& a, const Image& b) const { return row_dot(embed(a), embed(b)); }
};

class RandomConvPerceptual final : public PerceptualExtractor {
 public:
  explicit RandomConvPerceptual(std::uint64_t seed = 17) {
    Rng rng(seed);
    const int chans[4] = {3, 8, 16, 16};
    for (int l = 0; l < 3; ++l) {
      Tensor w = Tensor::zeros({chans[l + 1], chans[l], 3, 3});
      const double sd = 1.4 / std::sqrt(9.0 * chans[l]);
      for (double& v : w.data()) v = sd * rng.normal();
      weights_.push_back(w);
    }
  }
  std::vector<Tensor> features(const Image& image) const override {
    std::vector<Tensor> out;
    Tensor x = image;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      x = leaky_relu(conv2d(x, weights_[l], Tensor(), l == 0 ? 1 : 2));
      out.push_back(x);
    }
    return out;
  }

 private:
  std::vector<Tensor> weights_;
};

class RandomConvIdentity final : public IdentityEmbedder {
 public:
  explicit RandomConvIdentity(std::uint64_t seed = 19, int dim = 32) {
    Rng rng(seed);
    conv1_ = Tensor::zeros({8, 3, 3, 3});
    conv2_ = Tensor::zeros({16, 8, 3, 3});
    proj_ = Tensor::zeros({dim, 16 * 4});
    for (double& v : conv1_.data()) v = rng.normal() * 1.4 / std::sqrt(27.0);
    for (double& v : conv2_.data()) v = rng.normal() * 1.4 / std::sqrt(72.0);
    for (double& v : proj_.data()) v = rng.normal() / 8.0;
  }
  // Two strided convolutions, 2x2 spatial pooling, linear projection, L2 normalisation.
  Tensor embed(const Image& image) const override {
    if (image.rank() != 4 || image.dim(2) != image.dim(3) || image.dim(2) % 8 != 0) {
      throw std::invalid_argument("identity embedder: expects square images with size divisible by 8, got " +
                                  shape_str(image.shape()));
    }
    const int n = image.dim(0);
    Tensor x = leaky_relu(conv2d(image, conv1_, Tensor(), 2));
    x = leaky_relu(conv2d(x, conv2_, Tensor(), 2));
    x = avg_pool(x, x.dim(2) / 2);
    return normalize_rows(linear(reshape(x, {n, 64}), proj_));
  }

 private:
  Tensor conv1_, conv2_, proj_;
};

struct LossExtractors {
  std::shared_ptr<const PerceptualExtractor> perceptual = std::make_shared<RandomConvPerceptual>();
  std::shared_ptr<const IdentityEmbedder> identity = std::make_shared<RandomConvIdentity>();
};

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                                " differ");
  }
}
}  // namespace detail

// Mean over the batch of 1 - cos(e(a), e(b)).
inline Tensor identity_loss(const Image& a, const Image& b, const IdentityEmbedder& e) {
  return add_scalar(scale(mean(e.similarity(a, b)), -1.0), 1.0);
}

// Encoder objective: lambda_mse * MSE + lambda_lpips * perceptual + lambda_id_wplus * identity.
inline Tensor loss_wplus(const Image& recon, const Image& target, const LossWeights& w, const LossExtractors& ext) {
  detail::require_same_shape(recon, target, "loss_wplus");
  Tensor total = scale(mse(recon, target), w.lambda_mse);
  if (w.lambda_lpips != 0.0) total = add(total, scale(ext.perceptual->distance(recon, target), w.lambda_lpips));
  if (w.lambda_id_wplus != 0.0) total = add(total, scale(identity_loss(recon, target, *ext.identity), w.lambda_id_wplus));
  return total;
}

// Reconstruction objective: lambda_l1 * MAE + lambda_p * perceptual + lambda_id * identity.
inline Tensor loss_rec(const Image& recon, const Image& target, const LossWeights& w, const LossExtractors& ext) {
  detail::require_same_shape(recon, target, "loss_rec");
  Tensor total = scale(mae(recon, target), w.lambda_l1);
  if (w.lambda_p != 0.0) total = add(total, scale(ext.perceptual->distance(recon, target), w.lambda_p));
  if (w.lambda_id != 0.0) total = add(total, scale(identity_loss(recon, target, *ext.identity), w.lambda_id));
  return total;
}

// Squared distance between two W+ codes, normalised by the number of code entries.
inline Tensor code_distance(const LatentCode& a, const LatentCode& b) {
  detail::require_same_shape(a, b, "code_distance");
  return mse(a, b);
}

// Latent consistency between two images under the (frozen) encoder.
inline Tensor loss_consistency(const Image& a, const Image& b, const Encoder& encoder) {
  detail::require_same_shape(a, b, "loss_consistency");
  return code_distance(encoder.encode(a), encoder.encode(b));
}

namespace detail {
inline void require_probabilities(const Tensor& s, const char* what) {
  for (double v : s.data()) {
    if (!(v > 0.0 && v < 1.0)) {
      throw std::invalid_argument(std::string(what) + ": discriminator scores must lie in (0, 1), got " + std::to_string(v));
    }
  }
}
}  // namespace detail

// Generator adversarial loss: -E[log D(fake)].
inline Tensor loss_adv_g(const Tensor& d_fake) {
  detail::require_probabilities(d_fake, "loss_adv_g");
  return scale(mean(log(d_fake)), -1.0);
}

// Discriminator loss: -E[log D(real)] - E[log(1 - D(fake))] + gamma * E[||grad D(real)||]
// (squared norm when `squared_r1`).
inline Tensor loss_adv_d(const Tensor& d_real, const Tensor& d_fake, const Tensor& grad_norms_real, double gamma,
                         bool squared_r1 = false) {
  detail::require_probabilities(d_real, "loss_adv_d");
  detail::require_probabilities(d_fake, "loss_adv_d");
  if (!(gamma >= 0.0)) throw std::invalid_argument("loss_adv_d: gamma must be >= 0");
  Tensor total = add(scale(mean(log(d_real)), -1.0), scale(mean(log(add_scalar(scale(d_fake, -1.0), 1.0))), -1.0));
  if (gamma != 0.0) {
    const Tensor penalty = squared_r1 ? square(grad_norms_real) : grad_norms_real;
    total = add(total, scale(mean(penalty), gamma));
  }
  return total;
}

// Images entering the SVINet total loss. `synth` / `synth_target` may both be
// left undefined for batches without a synthetic pair.
struct SVINetLossInputs {
  Image novel;         // inpainted novel view of the real image
  Image rewarp;        // inpainted re-warp of the novel view back to the input camera
  Image real;          // the real input image
  Image synth;         // inpainted synthetic target view
  Image synth_target;  // rendered ground truth of the synthetic target view
};

// Batch concatenations of the total loss.
struct SVINetLossGroups {
  Image rec_pred, rec_target;  // [rewarp, synth] vs [real, synth_target]
  Image c_pred, c_target;      // [novel, rewarp, synth] vs [real, real, synth_target]
  Image adv_fake;              // [novel, rewarp, synth]
};

inline SVINetLossGroups svinet_loss_groups(const SVINetLossInputs& in) {
  if (!in.novel.defined() || !in.rewarp.defined() || !in.real.defined()) {
    throw std::invalid_argument("svinet loss grouping: novel, rewarp and real images are required");
  }
  if (in.synth.defined() != in.synth_target.defined()) {
    throw std::invalid_argument("svinet loss grouping: synth and synth_target must be given together");
  }
  detail::require_same_shape(in.novel, in.real, "svinet loss grouping (novel vs real)");
  detail::require_same_shape(in.rewarp, in.real, "svinet loss grouping (rewarp vs real)");
  SVINetLossGroups g;
  if (in.synth.defined()) {
    detail::require_same_shape(in.synth, in.synth_target, "svinet loss grouping (synth vs synth_target)");
    if (in.synth.dim(1) != in.real.dim(1) || in.synth.dim(2) != in.real.dim(2) || in.synth.dim(3) != in.real.dim(3)) {
      throw std::invalid_argument("svinet loss grouping: synthetic and real images differ in resolution");
    }
    g.rec_pred = concat({in.rewarp, in.synth}, 0);
    g.rec_target = concat({in.real, in.synth_target}, 0);
    g.c_pred = concat({in.novel, in.rewarp, in.synth}, 0);
    g.c_target = concat({in.real, in.real, in.synth_target}, 0);
  } else {
    g.rec_pred = in.rewarp;
    g.rec_target = in.real;
    g.c_pred = concat({in.novel, in.rewarp}, 0);
    g.c_target = concat({in.real, in.real}, 0);
  }
  g.adv_fake = g.c_pred;
  return g;
}

struct SVINetLossTerms {
  Tensor rec, consistency, adv, total;
};

inline Tensor weighted_svinet_total(const Tensor& rec, const Tensor& consistency, const Tensor& adv, const LossWeights& w) {
  return add(add(scale(rec, w.lambda_rec), scale(consistency, w.lambda_c)), scale(adv, w.lambda_adv));
}

// Total SVINet objective. `discriminator` maps images to probabilities [N];
// it may be empty when lambda_adv is zero. With `use_consistency` false the
// consistency term is reported as zero and left out of the graph.
inline SVINetLossTerms loss_svinet_total(const SVINetLossInputs& in, const LossWeights& w, const LossExtractors& ext,
                                         const Encoder& encoder,
                                         const std::function<Tensor(const Image&)>& discriminator,
                                         bool use_consistency = true) {
  const SVINetLossGroups g = svinet_loss_groups(in);
  SVINetLossTerms t;
  t.rec = loss_rec(g.rec_pred, g.rec_target, w, ext);
  t.consistency = use_consistency && w.lambda_c != 0.0 ? loss_consistency(g.c_pred, g.c_target, encoder) : Tensor::scalar(0.0);
  if (w.lambda_adv != 0.0) {
    if (!discriminator) throw std::invalid_argument("loss_svinet_total: adversarial weight set without a discriminator");
    t.adv = loss_adv_g(discriminator(g.adv_fake));
  } else {
    t.adv = Tensor::scalar(0.0);
  }
  t.total = weighted_svinet_total(t.rec, t.consistency, t.adv, w);
  return t;
}

}  // namespace warpfill
