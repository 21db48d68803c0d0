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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "warpfill/app/selfcheck.hpp"
#include "warpfill/editing.hpp"

namespace warpfill {
namespace {

double l2_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  return std::sqrt(s);
}

class EditingFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    pcfg.resolution = 16;
    models.generator = &gen;
    models.encoder = &enc;
    models.svinet = &net;
    Rng rng(21);
    w0 = gen.sample_latent(rng);
    w1 = gen.sample_latent(rng);
    pose = pcfg.orbit(0.15, 0.05);
    image = render(w0, pose);
    cfg.inversion_steps = 20;
    cfg.tuning_steps = 10;
    cfg.n_pseudo_views = 2;
  }

  Image render(const LatentCode& w, const Pose& c, const NoiseInput& n = Tensor()) const {
    NoGradGuard guard;
    return gen.render(w, {c}, pcfg.K, pcfg.resolution, pcfg.resolution, pcfg.sampling, n).image.detach();
  }

  PipelineConfig pcfg;
  Generator gen{detail::small_generator_config(), 1};
  Encoder enc{detail::small_encoder_config(), 2};
  SVINet net{detail::small_svinet_config(), 3};
  Models models;
  LatentCode w0, w1;
  Pose pose;
  Image image;
  OptConfig cfg;
};

TEST(OptConfigTest, Defaults) {
  const OptConfig c;
  EXPECT_EQ(c.lambda_mv, 1.0);
  EXPECT_EQ(c.lambda2_g, 1.0);
  EXPECT_EQ(c.lambda_lpips_g, 1.0);
  EXPECT_EQ(c.lambda_n, 1e3);
  EXPECT_EQ(c.lr_latent, 1e-2);
  EXPECT_EQ(c.lr_generator, 1e-3);
  EXPECT_NO_THROW(c.validate());
  OptConfig bad;
  bad.lambda_mv = -1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = OptConfig{};
  bad.inversion_steps = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(NoiseRegularizer, ZeroForZeroNoiseAndPositiveOtherwise) {
  EXPECT_EQ(noise_regularizer(Tensor::zeros({1, 3, 16, 16})).item(), 0.0);
  Rng rng(3);
  Tensor n = Tensor::zeros({1, 3, 16, 16});
  for (double& v : n.data()) v = rng.normal();
  EXPECT_GT(noise_regularizer(n).item(), 0.0);
  EXPECT_THROW(noise_regularizer(Tensor::zeros({3, 16, 16})), std::invalid_argument);
}

TEST_F(EditingFixture, InvertFixedPointNeedsNoIterations) {
  const NoiseInput n0 = Tensor::zeros(gen.default_noise(1).shape());
  const Image target = render(w0, pose, n0);
  const InversionResult r = invert(target, pose, gen, pcfg, cfg, w0, n0);
  EXPECT_EQ(r.initial_loss, 0.0);
  EXPECT_EQ(r.final_loss, 0.0);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.w.data(), w0.data());
  EXPECT_EQ(r.noise.data(), n0.data());
}

TEST_F(EditingFixture, InvertNeverIncreasesObjective) {
  const InversionResult r = invert(image, pose, gen, pcfg, cfg, w1);
  ASSERT_FALSE(r.history.empty());
  EXPECT_LE(r.final_loss, r.initial_loss);
  EXPECT_EQ(r.final_loss, *std::min_element(r.history.begin(), r.history.end()));
  EXPECT_LT(r.final_loss, r.initial_loss);
  // The returned iterate reproduces the reported objective.
  const Tensor m = mse(render(r.w, pose, r.noise), image);
  EXPECT_NEAR(m.item() + cfg.lambda_n * noise_regularizer(r.noise).item(), r.final_loss, 1e-12);
}

TEST_F(EditingFixture, InvertLeavesGeneratorUntouched) {
  const auto before = gen.params().snapshot();
  invert(image, pose, gen, pcfg, cfg, w1);
  EXPECT_EQ(before, gen.params().snapshot());
}

TEST_F(EditingFixture, InvertDivergenceRaisesOptimizationFailure) {
  Image bad = image.clone();
  bad.data()[5] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(invert(bad, pose, gen, pcfg, cfg, w1), OptimizationFailure);
  EXPECT_THROW(invert(concat({image, image}, 0), pose, gen, pcfg, cfg, w1), std::invalid_argument);
}

TEST_F(EditingFixture, MultiviewEmptyForZeroViews) {
  OptConfig c = cfg;
  c.n_pseudo_views = 0;
  EXPECT_TRUE(multiview_set(image, pose, models, pcfg, c).empty());
}

TEST_F(EditingFixture, MultiviewPosesDifferFromInputAndReplayBitwise) {
  OptConfig c = cfg;
  c.n_pseudo_views = 3;
  const std::vector<PseudoView> views = multiview_set(image, pose, models, pcfg, c);
  ASSERT_EQ(views.size(), 3u);
  const SourceView src = encode_source(models, pcfg, image, {pose});
  for (const PseudoView& v : views) {
    EXPECT_GT((v.pose.matrix() - pose.matrix()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(v.image.data(), synthesize_views(models, pcfg, src, {v.pose}).data());
  }
  const std::vector<PseudoView> again = multiview_set(image, pose, models, pcfg, c);
  for (std::size_t i = 0; i < views.size(); ++i) EXPECT_EQ(views[i].image.data(), again[i].image.data());
}

TEST_F(EditingFixture, PivotalTuneLeavesLatentUntouched) {
  const LatentCode w = w1.clone();
  const std::vector<double> before = w.data();
  const TuningResult r = pivotal_tune(gen, w, Tensor(), image, pose, {}, pcfg, cfg);
  EXPECT_EQ(w.data(), before);
  EXPECT_LE(r.final_input_loss, r.initial_input_loss);
  EXPECT_LE(*std::min_element(r.history.begin(), r.history.end()), r.history.front());
}

TEST_F(EditingFixture, PivotalTuneReducesInputLoss) {
  const TuningResult r = pivotal_tune(gen, w1, Tensor(), image, pose, {}, pcfg, cfg);
  EXPECT_LT(r.final_input_loss, r.initial_input_loss);
  EXPECT_GT(r.accepted, 0);
}

TEST_F(EditingFixture, PivotalTuneWithReproducedTargetKeepsParameters) {
  const NoiseInput n = gen.default_noise(1);
  const Image target = render(w0, pose, n);
  const auto before = gen.params().snapshot();
  const TuningResult r = pivotal_tune(gen, w0, n, target, pose, {}, pcfg, cfg);
  EXPECT_EQ(r.initial_input_loss, 0.0);
  EXPECT_EQ(before, gen.params().snapshot());
}

TEST_F(EditingFixture, PivotalTuneObjectiveWeightsPseudoViews) {
  const std::vector<PseudoView> views = multiview_set(image, pose, models, pcfg, cfg);
  OptConfig c = cfg;
  c.tuning_steps = 0;
  const TuningResult single = pivotal_tune(gen, w1, Tensor(), image, pose, {}, pcfg, c);
  const TuningResult with = pivotal_tune(gen, w1, Tensor(), image, pose, views, pcfg, c);
  c.lambda_mv = 0.0;
  const TuningResult off = pivotal_tune(gen, w1, Tensor(), image, pose, views, pcfg, c);
  EXPECT_GT(with.history.front(), single.history.front());
  EXPECT_NEAR(off.history.front(), single.history.front(), 1e-12);
  EXPECT_EQ(with.initial_input_loss, single.initial_input_loss);
}

TEST_F(EditingFixture, PivotalTuneDivergenceRaisesOptimizationFailure) {
  Image bad = image.clone();
  bad.data()[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(pivotal_tune(gen, w1, Tensor(), bad, pose, {}, pcfg, cfg), OptimizationFailure);
}

TEST_F(EditingFixture, EditWithZeroStrengthIsBitIdentical) {
  Rng rng(5);
  const LatentCode dir = gen.sample_latent(rng);
  const Pose novel = pcfg.orbit(-0.3, 0.1);
  EXPECT_EQ(edit(w0, {dir, 0.0}, novel, gen, pcfg).data(), render(w0, novel).data());
}

TEST_F(EditingFixture, EditShiftIsLinearInStrength) {
  Rng rng(6);
  const LatentCode dir = gen.sample_latent(rng);
  const Pose novel = pcfg.orbit(0.3, 0.0);
  const double a1 = 0.3, a2 = 0.45;
  const LatentCode shifted = add(w0, scale(dir, a1 + a2));
  EXPECT_EQ(edit(w0, {dir, a1 + a2}, novel, gen, pcfg).data(), render(shifted, novel).data());
  EXPECT_EQ(edit(w0, {dir, a1 + a2}, novel, gen, pcfg).data(), edit(shifted, {dir, 0.0}, novel, gen, pcfg).data());
}

TEST_F(EditingFixture, EditIsContinuousInStrength) {
  Rng rng(7);
  const LatentCode dir = gen.sample_latent(rng);
  const Image base = render(w0, pose);
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const double d = l2_diff(edit(w0, {dir, a}, pose, gen, pcfg), base);
    EXPECT_LT(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, 1e-3);
  EXPECT_THROW(edit(w0, {Tensor::zeros({1, 2, 6}), 1.0}, pose, gen, pcfg), std::invalid_argument);
}

TEST_F(EditingFixture, ReferenceEqualToSourceMatchesPlainSynthesis) {
  const SourceView src = encode_source(models, pcfg, image, {pose});
  const std::vector<Pose> novel{pcfg.orbit(-0.4, 0.1)};
  EXPECT_EQ(reference_style_synthesize(models, pcfg, src, src, novel).data(),
            synthesize_views(models, pcfg, src, novel).data());
}

TEST_F(EditingFixture, VisiblePixelsIndependentOfReferenceAndHolesDiffer) {
  const SourceView src = encode_source(models, pcfg, image, {pose});
  const SourceView ref_a = encode_source(models, pcfg, render(w1, pose), {pose});
  Rng rng(8);
  const SourceView ref_b = encode_source(models, pcfg, render(gen.sample_latent(rng), pose), {pose});
  const std::vector<Pose> novel{pcfg.orbit(-0.5, 0.1)};
  WarpedView ta, tb;
  const Image out_a = reference_style_synthesize(models, pcfg, src, ref_a, novel, &ta);
  const Image out_b = reference_style_synthesize(models, pcfg, src, ref_b, novel, &tb);
  EXPECT_EQ(ta.warped.image.data(), tb.warped.image.data());
  EXPECT_EQ(ta.warped.mask.data(), tb.warped.mask.data());
  const std::size_t hw = 16 * 16;
  int holes = 0;
  double hole_diff = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    const bool hole = ta.warped.mask.data()[p] > 0.5;
    holes += hole;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = c * hw + p;
      if (!hole) {
        EXPECT_EQ(ta.initial.data()[i], tb.initial.data()[i]);
      } else {
        hole_diff = std::max(hole_diff, std::fabs(out_a.data()[i] - out_b.data()[i]));
      }
    }
  }
  ASSERT_GT(holes, 0);
  EXPECT_GT(hole_diff, 1e-4);
}

}  // namespace
}  // namespace warpfill
