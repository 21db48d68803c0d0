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


#include <gtest/gtest.h>

#include <cmath>

#include "warpfill/app/selfcheck.hpp"
#include "warpfill/core/gradcheck.hpp"
#include "warpfill/losses.hpp"
#include "warpfill/training.hpp"

namespace warpfill {
namespace {

Tensor random_image(const Shape& s, Rng& rng, double lo = -0.9, double hi = 0.9) {
  Tensor t = Tensor::zeros(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

LossWeights only(double LossWeights::*field, double value) {
  LossWeights w;
  for (double LossWeights::*f : {&LossWeights::lambda_mse, &LossWeights::lambda_lpips, &LossWeights::lambda_id_wplus,
                                 &LossWeights::lambda_l1, &LossWeights::lambda_p, &LossWeights::lambda_id}) {
    w.*f = 0.0;
  }
  w.*field = value;
  return w;
}

TEST(LossWeights, DefaultsMatchPublishedValues) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_mse, 1.0);
  EXPECT_EQ(w.lambda_lpips, 0.8);
  EXPECT_EQ(w.lambda_id_wplus, 0.1);
  EXPECT_EQ(w.lambda_l1, 10.0);
  EXPECT_EQ(w.lambda_p, 30.0);
  EXPECT_EQ(w.lambda_id, 0.1);
  EXPECT_EQ(w.lambda_rec, 1.0);
  EXPECT_EQ(w.lambda_c, 0.1);
  EXPECT_EQ(w.lambda_adv, 10.0);
  EXPECT_EQ(w.gamma, 10.0);
  EXPECT_FALSE(w.squared_r1);
}

TEST(LossWeights, RejectsNegativeOrNonFinite) {
  LossWeights w;
  w.lambda_c = -0.1;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = LossWeights{};
  w.gamma = std::nan("");
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(Extractors, IdentityEmbeddingsAreUnitNorm) {
  Rng rng(1);
  const RandomConvIdentity e;
  const Tensor emb = e.embed(random_image({3, 3, 64, 64}, rng));
  ASSERT_EQ(emb.shape(), (Shape{3, 32}));
  for (int r = 0; r < 3; ++r) {
    double n2 = 0.0;
    for (int k = 0; k < 32; ++k) n2 += emb.data()[r * 32 + k] * emb.data()[r * 32 + k];
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-6);
  }
  EXPECT_THROW(e.embed(Tensor::zeros({1, 3, 12, 12})), std::invalid_argument);
}

TEST(Extractors, DeterministicAcrossInstances) {
  Rng rng(2);
  const Tensor a = random_image({1, 3, 16, 16}, rng), b = random_image({1, 3, 16, 16}, rng);
  EXPECT_EQ(RandomConvPerceptual().distance(a, b).item(), RandomConvPerceptual().distance(a, b).item());
  EXPECT_EQ(RandomConvIdentity().embed(a).data(), RandomConvIdentity().embed(a).data());
  EXPECT_EQ(RandomConvPerceptual().distance(a, a).item(), 0.0);
}

TEST(LossWplus, IdenticalImagesGiveZero) {
  Rng rng(3);
  const Tensor a = random_image({2, 3, 16, 16}, rng);
  EXPECT_NEAR(loss_wplus(a, a, LossWeights{}, LossExtractors{}).item(), 0.0, 1e-12);
}

TEST(LossWplus, MseHandCase) {
  const Tensor a = Tensor::full({1, 3, 2, 2}, 0.2), b = Tensor::full({1, 3, 2, 2}, -0.3);
  EXPECT_NEAR(loss_wplus(a, b, only(&LossWeights::lambda_mse, 1.0), LossExtractors{}).item(), 0.25, 1e-15);
}

TEST(LossWplus, RejectsShapeMismatch) {
  EXPECT_THROW(loss_wplus(Tensor::zeros({1, 3, 8, 8}), Tensor::zeros({1, 3, 8, 16}), LossWeights{}, LossExtractors{}),
               std::invalid_argument);
}

TEST(LossRec, IdenticalImagesGiveZero) {
  Rng rng(4);
  const Tensor a = random_image({1, 3, 16, 16}, rng);
  EXPECT_NEAR(loss_rec(a, a, LossWeights{}, LossExtractors{}).item(), 0.0, 1e-12);
}

TEST(LossRec, MaeHandCase) {
  Rng rng(5);
  const Tensor a = random_image({1, 3, 8, 8}, rng);
  const Tensor b = add_scalar(a, 0.1);
  EXPECT_NEAR(loss_rec(a, b, only(&LossWeights::lambda_l1, 10.0), LossExtractors{}).item(), 1.0, 1e-12);
}

TEST(LossRec, PositiveForDifferentImages) {
  Rng rng(6);
  const Tensor a = random_image({1, 3, 16, 16}, rng), b = random_image({1, 3, 16, 16}, rng);
  EXPECT_GT(loss_rec(a, b, LossWeights{}, LossExtractors{}).item(), 0.0);
  EXPECT_GT(loss_wplus(a, b, LossWeights{}, LossExtractors{}).item(), 0.0);
}

TEST(Consistency, CodeDistanceHandCase) {
  Tensor a = Tensor::zeros({1, 8, 64});
  Tensor b = Tensor::zeros({1, 8, 64});
  b.data()[137] = 1.0;
  EXPECT_DOUBLE_EQ(code_distance(a, b).item(), 1.0 / 512.0);
}

TEST(Consistency, ZeroOnEqualAndSymmetric) {
  const Encoder enc(EncoderConfig{}, 2);
  Rng rng(7);
  const Tensor a = random_image({1, 3, 64, 64}, rng), b = random_image({1, 3, 64, 64}, rng);
  EXPECT_EQ(loss_consistency(a, a, enc).item(), 0.0);
  EXPECT_EQ(loss_consistency(a, b, enc).item(), loss_consistency(b, a, enc).item());
  EXPECT_GT(loss_consistency(a, b, enc).item(), 0.0);
}

TEST(Adversarial, GeneratorLossAtHalfIsLogTwo) {
  EXPECT_NEAR(loss_adv_g(Tensor::full({3}, 0.5)).item(), 0.6931, 1e-4);
}

TEST(Adversarial, DiscriminatorHandCase) {
  const Tensor half = Tensor::full({2}, 0.5);
  EXPECT_NEAR(loss_adv_d(half, half, Tensor::full({2}, 0.3), 10.0).item(), 4.3863, 1e-4);
  // Squared variant: 10 * 0.09.
  EXPECT_NEAR(loss_adv_d(half, half, Tensor::full({2}, 0.3), 10.0, true).item(), 2.0 * std::log(2.0) + 0.9, 1e-12);
}

TEST(Adversarial, OptimalDiscriminatorLimit) {
  double prev = 1e9;
  for (double delta : {1e-1, 1e-2, 1e-4, 1e-8}) {
    const double v =
        loss_adv_d(Tensor::full({1}, 1.0 - delta), Tensor::full({1}, delta), Tensor::full({1}, 0.0), 0.0).item();
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-7);
}

TEST(Adversarial, RejectsScoresOutsideOpenUnitInterval) {
  EXPECT_THROW(loss_adv_g(Tensor::full({1}, 0.0)), std::invalid_argument);
  EXPECT_THROW(loss_adv_g(Tensor::full({1}, 1.0)), std::invalid_argument);
  const Tensor h = Tensor::full({1}, 0.5);
  EXPECT_THROW(loss_adv_d(Tensor::full({1}, 1.2), h, h, 1.0), std::invalid_argument);
  EXPECT_THROW(loss_adv_d(h, Tensor::full({1}, -0.1), h, 1.0), std::invalid_argument);
  EXPECT_THROW(loss_adv_d(h, h, h, -1.0), std::invalid_argument);
}

TEST(SVINetTotal, WeightedSumHandCase) {
  const Tensor t = weighted_svinet_total(Tensor::scalar(2.0), Tensor::scalar(1.0), Tensor::scalar(0.5), LossWeights{});
  EXPECT_NEAR(t.item(), 7.1, 1e-12);
  EXPECT_EQ(weighted_svinet_total(Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(0.0), LossWeights{}).item(), 0.0);
}

SVINetLossInputs distinct_inputs(int s) {
  SVINetLossInputs in;
  in.novel = Tensor::full({1, 3, s, s}, 0.1);
  in.rewarp = Tensor::full({1, 3, s, s}, 0.2);
  in.real = Tensor::full({1, 3, s, s}, 0.3);
  in.synth = Tensor::full({1, 3, s, s}, 0.4);
  in.synth_target = Tensor::full({1, 3, s, s}, 0.5);
  return in;
}

std::vector<double> sample_values(const Tensor& batch) {
  std::vector<double> out;
  const std::size_t per = batch.numel() / static_cast<std::size_t>(batch.dim(0));
  for (int b = 0; b < batch.dim(0); ++b) out.push_back(batch.data()[b * per]);
  return out;
}

TEST(SVINetTotal, GroupingMatchesConcatenations) {
  const SVINetLossGroups g = svinet_loss_groups(distinct_inputs(4));
  EXPECT_EQ(sample_values(g.rec_pred), (std::vector<double>{0.2, 0.4}));
  EXPECT_EQ(sample_values(g.rec_target), (std::vector<double>{0.3, 0.5}));
  EXPECT_EQ(sample_values(g.c_pred), (std::vector<double>{0.1, 0.2, 0.4}));
  EXPECT_EQ(sample_values(g.c_target), (std::vector<double>{0.3, 0.3, 0.5}));
  EXPECT_EQ(sample_values(g.adv_fake), (std::vector<double>{0.1, 0.2, 0.4}));
  // The novel view never enters the reconstruction group.
  for (double v : g.rec_pred.data()) EXPECT_NE(v, 0.1);
}

TEST(SVINetTotal, GroupingWithoutSyntheticPair) {
  SVINetLossInputs in = distinct_inputs(4);
  in.synth = Tensor();
  in.synth_target = Tensor();
  const SVINetLossGroups g = svinet_loss_groups(in);
  EXPECT_EQ(sample_values(g.rec_pred), (std::vector<double>{0.2}));
  EXPECT_EQ(sample_values(g.c_pred), (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(sample_values(g.c_target), (std::vector<double>{0.3, 0.3}));
}

TEST(SVINetTotal, GroupingMismatchIsRejected) {
  SVINetLossInputs in = distinct_inputs(4);
  in.synth_target = Tensor();
  EXPECT_THROW(svinet_loss_groups(in), std::invalid_argument);
  in = distinct_inputs(4);
  in.rewarp = Tensor::zeros({1, 3, 4, 8});
  EXPECT_THROW(svinet_loss_groups(in), std::invalid_argument);
  in = distinct_inputs(4);
  in.synth = Tensor::zeros({1, 3, 8, 8});
  in.synth_target = Tensor::zeros({1, 3, 8, 8});
  EXPECT_THROW(svinet_loss_groups(in), std::invalid_argument);
}

TEST(SVINetTotal, TermsMatchComponentLosses) {
  Rng rng(8);
  SVINetLossInputs in;
  for (Tensor* t : {&in.novel, &in.rewarp, &in.real, &in.synth, &in.synth_target}) *t = random_image({1, 3, 16, 16}, rng);
  const Encoder enc(detail::small_encoder_config(), 1);
  const Discriminator disc(16, 3);
  const LossExtractors ext;
  const LossWeights w;
  const SVINetLossTerms t = loss_svinet_total(in, w, ext, enc, [&](const Image& x) { return disc(x); });
  const SVINetLossGroups g = svinet_loss_groups(in);
  EXPECT_DOUBLE_EQ(t.rec.item(), loss_rec(g.rec_pred, g.rec_target, w, ext).item());
  EXPECT_DOUBLE_EQ(t.consistency.item(), loss_consistency(g.c_pred, g.c_target, enc).item());
  EXPECT_DOUBLE_EQ(t.adv.item(), loss_adv_g(disc(g.adv_fake)).item());
  EXPECT_NEAR(t.total.item(), t.rec.item() + 0.1 * t.consistency.item() + 10.0 * t.adv.item(), 1e-12);
  const SVINetLossTerms off = loss_svinet_total(in, w, ext, enc, [&](const Image& x) { return disc(x); }, false);
  EXPECT_EQ(off.consistency.item(), 0.0);
  LossWeights no_adv = w;
  no_adv.lambda_adv = 0.0;
  EXPECT_EQ(loss_svinet_total(in, no_adv, ext, enc, {}).adv.item(), 0.0);
  EXPECT_THROW(loss_svinet_total(in, w, ext, enc, {}), std::invalid_argument);
}

// Finite-difference checks on 8x8 images (16x16 where the encoder needs it).
class LossGradients : public ::testing::Test {
 protected:
  Rng rng{9};
  LossExtractors ext;
  LossWeights w;
  Tensor a = random_image({2, 3, 8, 8}, rng).clone(true);
  Tensor b = random_image({2, 3, 8, 8}, rng).clone(true);
};

TEST_F(LossGradients, EncoderObjective) {
  EXPECT_LT(gradcheck([&] { return loss_wplus(a, b, w, ext); }, {a, b}, 1e-6, 48).rel_error, 1e-4);
}

TEST_F(LossGradients, ReconstructionObjective) {
  EXPECT_LT(gradcheck([&] { return loss_rec(a, b, w, ext); }, {a, b}, 1e-6, 48).rel_error, 1e-4);
}

TEST_F(LossGradients, Consistency) {
  const Encoder enc(detail::small_encoder_config(), 4);
  Tensor x = random_image({1, 3, 16, 16}, rng).clone(true), y = random_image({1, 3, 16, 16}, rng).clone(true);
  EXPECT_LT(gradcheck([&] { return loss_consistency(x, y, enc); }, {x, y}, 1e-6, 48).rel_error, 1e-4);
}

TEST_F(LossGradients, Adversarial) {
  Tensor p = random_image({6}, rng, 0.05, 0.95).clone(true);
  Tensor q = random_image({6}, rng, 0.05, 0.95).clone(true);
  Tensor n = random_image({6}, rng, 0.1, 2.0).clone(true);
  EXPECT_LT(gradcheck([&] { return loss_adv_g(p); }, {p}).rel_error, 1e-4);
  EXPECT_LT(gradcheck([&] { return loss_adv_d(p, q, n, 10.0); }, {p, q, n}).rel_error, 1e-4);
  EXPECT_LT(gradcheck([&] { return loss_adv_d(p, q, n, 10.0, true); }, {p, q, n}).rel_error, 1e-4);
}

TEST_F(LossGradients, DiscriminatorScoresOfImages) {
  const Discriminator disc(16, 6);
  Tensor x = random_image({2, 3, 16, 16}, rng).clone(true);
  EXPECT_LT(gradcheck([&] { return loss_adv_g(disc(x)); }, {x}, 1e-6, 48).rel_error, 1e-4);
}

TEST_F(LossGradients, SVINetTotal) {
  const Encoder enc(detail::small_encoder_config(), 5);
  const Discriminator disc(16, 7);
  SVINetLossInputs in;
  for (Tensor* t : {&in.novel, &in.rewarp, &in.real, &in.synth, &in.synth_target}) {
    *t = random_image({1, 3, 16, 16}, rng).clone(true);
  }
  auto f = [&] { return loss_svinet_total(in, w, ext, enc, [&](const Image& x) { return disc(x); }).total; };
  EXPECT_LT(gradcheck(f, {in.novel, in.rewarp, in.synth}, 1e-6, 32).rel_error, 1e-4);
}

}  // namespace
}  // namespace warpfill
