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


// The self-check suite: every module's invariants and closed-form oracles,
// small enough to run in seconds on a CPU. Each check reports a measured
// value against a threshold; a check passes when value <= threshold (NaN
// never passes).

#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "warpfill/core/gradcheck.hpp"
#include "warpfill/encoder.hpp"
#include "warpfill/generator.hpp"
#include "warpfill/geometry.hpp"
#include "warpfill/losses.hpp"
#include "warpfill/svinet.hpp"
#include "warpfill/training.hpp"
#include "warpfill/warping.hpp"

namespace warpfill {

struct CheckResult {
  std::string group;
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

struct SelfCheckOptions {
  // Demodulation epsilon used by the modulated-convolution checks; a
  // non-positive value is a deliberate corruption (negative control).
  double demod_eps = 1e-8;
};

// Reference spectral transform: full complex 2-D DFT matrices, per-frequency
// channel mixing of the stacked [real, imaginary] half spectrum with
// `mix` ([2c, 2c] row-major), optional leaky ReLU, Hermitian extension and the
// full inverse DFT. Orthonormal scaling in both directions.
inline Tensor spectral_oracle(const Tensor& x, const Tensor& mix, bool activation) {
  using C = std::complex<double>;
  const int c = x.dim(1), h = x.dim(2), w = x.dim(3), wf = w / 2 + 1;
  auto dft = [](int n, double sign) {
    Eigen::MatrixXcd m(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) m(a, b) = std::polar(1.0, sign * 2.0 * M_PI * a * b / n);
    }
    return m;
  };
  const Eigen::MatrixXcd fh = dft(h, -1.0), fw = dft(w, -1.0), ih = dft(h, 1.0), iw = dft(w, 1.0);
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  std::vector<Eigen::MatrixXcd> spectra(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    Eigen::MatrixXcd plane(h, w);
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) plane(r, q) = x.data()[(static_cast<std::size_t>(ch) * h + r) * w + q];
    }
    spectra[static_cast<std::size_t>(ch)] = norm * fh * plane * fw.transpose();
  }
  std::vector<Eigen::MatrixXcd> mixed(static_cast<std::size_t>(c), Eigen::MatrixXcd::Zero(h, w));
  for (int k = 0; k < h; ++k) {
    for (int l = 0; l < wf; ++l) {
      std::vector<double> in(2 * static_cast<std::size_t>(c)), out(2 * static_cast<std::size_t>(c), 0.0);
      for (int ch = 0; ch < c; ++ch) {
        in[static_cast<std::size_t>(ch)] = spectra[static_cast<std::size_t>(ch)](k, l).real();
        in[static_cast<std::size_t>(c + ch)] = spectra[static_cast<std::size_t>(ch)](k, l).imag();
      }
      for (int o = 0; o < 2 * c; ++o) {
        for (int i = 0; i < 2 * c; ++i) out[static_cast<std::size_t>(o)] += mix.data()[static_cast<std::size_t>(o) * 2 * c + i] * in[static_cast<std::size_t>(i)];
        if (activation && out[static_cast<std::size_t>(o)] < 0.0) out[static_cast<std::size_t>(o)] *= 0.2;
      }
      for (int ch = 0; ch < c; ++ch) {
        mixed[static_cast<std::size_t>(ch)](k, l) = C(out[static_cast<std::size_t>(ch)], out[static_cast<std::size_t>(c + ch)]);
      }
    }
  }
  Tensor y = Tensor::zeros(x.shape());
  for (int ch = 0; ch < c; ++ch) {
    Eigen::MatrixXcd full = mixed[static_cast<std::size_t>(ch)];
    for (int k = 0; k < h; ++k) {
      for (int l = wf; l < w; ++l) full(k, l) = std::conj(mixed[static_cast<std::size_t>(ch)]((h - k) % h, w - l));
    }
    const Eigen::MatrixXcd back = norm * ih * full * iw.transpose();
    for (int r = 0; r < h; ++r) {
      for (int q = 0; q < w; ++q) y.data()[(static_cast<std::size_t>(ch) * h + r) * w + q] = back(r, q).real();
    }
  }
  return y;
}

// Camera-ray round trip c -> c' -> c of a generator-rendered scene: mean
// absolute error over pixels that are co-visible in both views and not holes
// after the return warp.
inline double warp_round_trip_error(const Generator& gen, const LatentCode& w, const Pose& c, const Pose& novel,
                                    const Intrinsics& k, int res, const SamplingConfig& sc) {
  NoGradGuard guard;
  const WarpConfig wc = WarpConfig::for_sampling(sc);
  const RenderOutput a = gen.render(w, {c}, k, res, res, sc);
  const RenderOutput b = gen.render(w, {novel}, k, res, res, sc);
  const WarpResult fwd = forward_warp(a.image, a.depth, relative_pose(c, novel), k, wc);
  const WarpResult back = rewarp(fwd, b.depth, {relative_pose(novel, c)}, k, wc);
  const Tensor co = covisibility_mask(a.depth, {c}, b.depth, {novel}, k);
  const std::size_t hw = static_cast<std::size_t>(res) * res;
  double err = 0.0, n = 0.0;
  for (std::size_t p = 0; p < hw; ++p) {
    if (co.data()[p] < 0.5 || back.mask.data()[p] > 0.5) continue;
    for (int ch = 0; ch < 3; ++ch) err += std::fabs(back.image.data()[ch * hw + p] - a.image.data()[ch * hw + p]);
    n += 3.0;
  }
  return n > 0.0 ? err / n : std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

class CheckRunner {
 public:
  explicit CheckRunner(std::vector<CheckResult>& out) : out_(out) {}
  void run(const std::string& group, const std::string& name, double threshold, const std::function<double()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.group = group;
    r.name = name;
    r.threshold = threshold;
    try {
      r.value = f();
    } catch (const std::exception&) {
      r.value = std::numeric_limits<double>::quiet_NaN();
    }
    r.passed = r.value <= threshold;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out_.push_back(r);
  }

 private:
  std::vector<CheckResult>& out_;
};

inline Tensor uniform_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

inline double bool_check(bool ok) { return ok ? 0.0 : 1.0; }

inline GeneratorConfig small_generator_config() {
  GeneratorConfig c;
  c.levels = 4;
  c.latent_dim = 6;
  c.plane_channels = 4;
  c.plane_res = 8;
  c.synthesis_channels = 6;
  c.decoder_hidden = 8;
  return c;
}

inline SVINetConfig small_svinet_config() {
  SVINetConfig c;
  c.image_size = 16;
  c.base_channels = 8;
  c.n_down = 2;
  c.n_up = 2;
  c.n_blocks = 2;
  c.levels = 4;
  c.latent_dim = 6;
  return c;
}

inline EncoderConfig small_encoder_config() {
  EncoderConfig c;
  c.image_size = 16;
  c.levels = 4;
  c.latent_dim = 6;
  c.base_channels = 4;
  c.pooled = 2;
  c.coarse_levels = 2;
  c.mid_levels = 1;
  return c;
}

}  // namespace detail

inline void geometry_checks(std::vector<CheckResult>& out) {
  detail::CheckRunner run(out);
  run.run("geometry", "project(unproject(x)) identity", 1e-6, [] {
    Rng rng(1);
    const Intrinsics k{};
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const Pose p = orbit_pose(rng.uniform(-1, 1), rng.uniform(-0.6, 0.6), rng.uniform(1.5, 4.0));
      const double u = rng.uniform(0.05, 0.95), v = rng.uniform(0.05, 0.95), d = rng.uniform(0.5, 5.0);
      const Projection pr = project(unproject(u, v, d, k, p), k, p);
      worst = std::max({worst, std::fabs(pr.u - u), std::fabs(pr.v - v), std::fabs(pr.depth - d)});
    }
    return worst;
  });
  run.run("geometry", "relative pose composition vs 4x4 oracle", 1e-6, [] {
    Rng rng(2);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Pose a = orbit_pose(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), 2.7);
      const Pose b = orbit_pose(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), 2.2);
      const Pose c = orbit_pose(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), 3.1);
      const RelativePose comp = relative_pose(b, c).compose(relative_pose(a, b));
      const RelativePose direct = relative_pose(a, c);
      const Mat4 oracle = c.matrix().inverse() * a.matrix();
      worst = std::max({worst, (comp.R - direct.R).cwiseAbs().maxCoeff(), (comp.t - direct.t).cwiseAbs().maxCoeff(),
                        (oracle.topLeftCorner<3, 3>() - direct.R).cwiseAbs().maxCoeff(),
                        (oracle.topRightCorner<3, 1>() - direct.t).cwiseAbs().maxCoeff()});
    }
    return worst;
  });
  run.run("geometry", "mirror_pose involution (exact)", 0.0, [] {
    Rng rng(3);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Pose p = orbit_pose(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), rng.uniform(2.0, 3.0));
      const Pose m = mirror_pose(mirror_pose(p));
      worst = std::max({worst, (m.R - p.R).cwiseAbs().maxCoeff(), (m.t - p.t).cwiseAbs().maxCoeff()});
    }
    return worst;
  });
}

inline void rendering_checks(std::vector<CheckResult>& out) {
  detail::CheckRunner run(out);
  run.run("rendering", "3-sample ray vs hand compositing", 1e-6, [] {
    SamplingConfig cfg;
    cfg.n_samples = 3;
    cfg.near = 1.0;
    cfg.far = 2.5;
    const double sig[3] = {0.4, 1.3, 2.2};
    const Eigen::Vector3d col[3] = {{1, 0, 0}, {0, 1, 0}, {0.2, 0.3, 0.9}};
    RadianceField f = [&](const Vec3& p) {
      const double t = -p.z();
      const int i = t < 1.5 ? 0 : (t < 2.0 ? 1 : 2);
      return RadianceSample{sig[i], col[i]};
    };
    RayBundle ray;
    ray.height = ray.width = 1;
    ray.origins = {Vec3::Zero()};
    ray.directions = {Vec3(0, 0, -1)};
    const double a0 = 1 - std::exp(-0.2), a1 = 1 - std::exp(-0.65), a2 = 1 - std::exp(-1.1);
    const double w0 = a0, w1 = (1 - a0) * a1, w2 = (1 - a0) * (1 - a1) * a2;
    const Eigen::Vector3d expected = w0 * col[0] + w1 * col[1] + w2 * col[2];
    const Tensor img = render_color(f, ray, cfg);
    double worst = 0.0;
    for (int q = 0; q < 3; ++q) worst = std::max(worst, std::fabs(img.data()[q] - expected[q]));
    const double depth = (w0 * 1.25 + w1 * 1.75 + w2 * 2.25) / (w0 + w1 + w2);
    return std::max(worst, std::fabs(render_depth(f, ray, cfg).data()[0] - depth));
  });
  run.run("rendering", "opaque slab depth vs dense oracle", 1e-3, [] {
    SamplingConfig cfg;
    cfg.n_samples = 4000;
    cfg.near = 1.0;
    cfg.far = 3.0;
    RadianceField slab = [](const Vec3& p) {
      const double t = p.norm();
      return RadianceSample{(t >= 1.5 && t < 1.6) ? 1e5 : 0.0, Eigen::Vector3d::Ones()};
    };
    const Tensor d = render_depth(slab, rays_for_camera(Intrinsics{}, Pose{}, 2, 2), cfg);
    double worst = 0.0;
    for (double v : d.data()) worst = std::max(worst, std::fabs(v - 1.5));
    return worst;
  });
  run.run("rendering", "compositing weights sum <= 1", 0.0, [] {
    Rng rng(8);
    SamplingConfig cfg;
    std::vector<double> t, delta, w;
    sample_distances(cfg, nullptr, t, delta);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<RadianceSample> s(t.size());
      for (auto& x : s) x.sigma = rng.uniform(0.0, 50.0);
      composite(s, t, delta, cfg, &w);
      double total = 0.0;
      for (double v : w) {
        if (v < 0.0) return 1.0;
        total += v;
      }
      worst = std::max(worst, total - 1.0 - 1e-12);
    }
    return std::max(worst, 0.0);
  });
}

inline void warping_checks(std::vector<CheckResult>& out) {
  detail::CheckRunner run(out);
  run.run("warping", "identity warp bit-exact", 0.0, [] {
    Rng rng(1);
    const Tensor img = detail::uniform_tensor({2, 3, 16, 16}, rng);
    const Tensor depth = detail::uniform_tensor({2, 1, 16, 16}, rng, 1.0, 4.0);
    const WarpResult r = forward_warp(img, depth, RelativePose{}, Intrinsics{});
    double m = 0.0;
    for (double v : r.mask.data()) m = std::max(m, v);
    return r.image.data() == img.data() ? m : 1.0;
  });
  run.run("warping", "plane translation vs projective shift", 1e-3, [] {
    const Intrinsics k{};
    const int h = 16, w = 16;
    const double z = 2.5, t = 0.13, shift = k.fx * t / z * w;
    Tensor img = Tensor::zeros({1, 1, h, w}), depth = Tensor::zeros({1, 1, h, w});
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        img.data()[j * w + i] = 0.1 * i - 0.03 * j;
        depth.data()[j * w + i] = zdepth_to_distance(z, (i + 0.5) / w, (j + 0.5) / h, k);
      }
    }
    RelativePose rel;
    rel.t = Vec3(-t, 0, 0);
    const WarpResult r = forward_warp(img, depth, rel, k);
    double err = 0.0;
    int count = 0;
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        if (r.mask.data()[j * w + i] > 0.5 || i + shift > w - 1) continue;
        err += std::fabs(r.image.data()[j * w + i] - (0.1 * (i + shift) - 0.03 * j));
        ++count;
      }
    }
    return count ? err / count : 1.0;
  });
  run.run("warping", "round trip yaw 0.4 on co-visible pixels", 2e-2, [] {
    const Generator gen(GeneratorConfig{}, 1);
    Rng rng(5);
    double worst = 0.0;
    for (int s = 0; s < 2; ++s) {
      const LatentCode w = gen.sample_latent(rng);
      const Pose c = orbit_pose(rng.uniform(-0.2, 0.2), rng.uniform(-0.1, 0.1), 2.7);
      const double yaw = std::atan2(c.t.x(), c.t.z());
      for (double dy : {0.4, -0.4}) {
        worst = std::max(worst, warp_round_trip_error(gen, w, c, orbit_pose(yaw + dy, 0.1, 2.7), Intrinsics{}, 64,
                                                      SamplingConfig{}));
      }
    }
    return worst;
  });
}

inline void svinet_checks(std::vector<CheckResult>& out, const SelfCheckOptions& opt) {
  detail::CheckRunner run(out);
  const double eps = opt.demod_eps;
  run.run("svinet", "demodulation all-ones kernel -> 1/3", 1e-7, [eps] {
    const Tensor w = modulate_weights(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1}, 1.0), eps);
    double worst = 0.0;
    for (double v : w.data()) worst = std::max(worst, std::fabs(v - 1.0 / 3.0));
    return worst;
  });
  run.run("svinet", "demodulation scale invariance", 1e-6, [eps] {
    Rng rng(4);
    const Tensor w = detail::uniform_tensor({4, 3, 3, 3}, rng);
    const Tensor s = detail::uniform_tensor({1, 3}, rng, 0.5, 1.5);
    return detail::max_abs_diff(modulate_weights(w, scale(s, 7.0), eps), modulate_weights(w, s, eps));
  });
  run.run("svinet", "FiLM identity exact", 0.0, [] {
    SVINet net(detail::small_svinet_config(), 1);
    FiLM& film = net.film();
    for (double& v : film.scale_w.data()) v = 0.0;
    for (double& v : film.shift_w.data()) v = 0.0;
    for (double& v : film.scale_b.data()) v = 1.0;
    for (double& v : film.shift_b.data()) v = 0.0;
    Rng rng(2);
    const int c = net.config().feature_channels();
    const Tensor f = detail::uniform_tensor({1, c, 4, 4}, rng);
    return detail::max_abs_diff(net.film_fuse(f, detail::uniform_tensor({1, c, 4, 4}, rng)), f);
  });
  run.run("svinet", "spectral branch vs DFT-matrix oracle (8x8)", 1e-5, [eps] {
    SVINetConfig cfg = detail::small_svinet_config();
    cfg.use_modulation = false;
    cfg.demod_eps = 1e-8;
    SVINet net(cfg, 9);
    const ModConv& conv = net.fourier_conv(0, 0);
    const int c = conv.weight.dim(1) / 2;
    Rng rng(11);
    double worst = 0.0;
    for (auto [h, w] : {std::pair{2, 2}, std::pair{4, 6}, std::pair{8, 8}}) {
      const Tensor x = detail::uniform_tensor({1, c, h, w}, rng);
      const Tensor got = net.spectral_transform(x, Tensor::zeros({1, cfg.levels, cfg.latent_dim}), conv);
      const Tensor mix = modulate_weights(conv.weight, Tensor::full({1, 2 * c}, 1.0), eps);
      worst = std::max(worst, detail::max_abs_diff(got, spectral_oracle(x, mix, cfg.spectral_activation)));
    }
    return worst;
  });
  run.run("svinet", "zero-weight FFC block is identity", 0.0, [] {
    SVINet net(detail::small_svinet_config(), 4);
    for (const auto& e : net.params().entries()) {
      if (e.name.rfind("svi.block0.", 0) == 0 && e.name.find(".affine.") == std::string::npos) {
        for (double& v : e.tensor.node()->value) v = 0.0;
      }
    }
    Rng rng(5);
    const Tensor x = detail::uniform_tensor({1, net.config().feature_channels(), 4, 4}, rng);
    return detail::max_abs_diff(net.ffc_block(x, detail::uniform_tensor({1, 4, 6}, rng), 0), x);
  });
}

inline void gradient_checks(std::vector<CheckResult>& out) {
  detail::CheckRunner run(out);
  const LossExtractors ext;
  const LossWeights lw;
  auto images = [](std::uint64_t seed) {
    Rng rng(seed);
    return std::pair{detail::uniform_tensor({2, 3, 8, 8}, rng, -0.9, 0.9).clone(true),
                     detail::uniform_tensor({2, 3, 8, 8}, rng, -0.9, 0.9)};
  };
  run.run("gradients", "encoder objective (W+ loss)", 1e-3, [&] {
    auto [a, b] = images(1);
    return gradcheck([&] { return loss_wplus(a, b, lw, ext); }, {a}).rel_error;
  });
  run.run("gradients", "reconstruction objective", 1e-3, [&] {
    auto [a, b] = images(2);
    return gradcheck([&] { return loss_rec(a, b, lw, ext); }, {a}).rel_error;
  });
  const Encoder enc(detail::small_encoder_config(), 3);
  auto images16 = [](std::uint64_t seed) {
    Rng rng(seed);
    return std::pair{detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9).clone(true),
                     detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9)};
  };
  run.run("gradients", "latent consistency", 1e-3, [&] {
    auto [a, b] = images16(3);
    return gradcheck([&] { return loss_consistency(a, b, enc); }, {a}).rel_error;
  });
  run.run("gradients", "generator adversarial (pointwise)", 1e-4, [] {
    Rng rng(4);
    Tensor p = detail::uniform_tensor({5}, rng, 0.1, 0.9).clone(true);
    return gradcheck([&] { return loss_adv_g(p); }, {p}).rel_error;
  });
  run.run("gradients", "discriminator adversarial + penalty (pointwise)", 1e-4, [] {
    Rng rng(5);
    Tensor r = detail::uniform_tensor({4}, rng, 0.1, 0.9).clone(true);
    Tensor f = detail::uniform_tensor({4}, rng, 0.1, 0.9).clone(true);
    Tensor g = detail::uniform_tensor({4}, rng, 0.2, 2.0).clone(true);
    return gradcheck([&] { return loss_adv_d(r, f, g, 10.0, false); }, {r, f, g}).rel_error;
  });
  run.run("gradients", "weighted SVINet total", 1e-3, [&] {
    Rng rng(6);
    SVINetLossInputs in;
    in.novel = detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9).clone(true);
    in.rewarp = detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9).clone(true);
    in.real = detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9);
    in.synth = detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9).clone(true);
    in.synth_target = detail::uniform_tensor({1, 3, 16, 16}, rng, -0.9, 0.9);
    const Discriminator disc(16, 7);
    auto f = [&] {
      return loss_svinet_total(in, lw, ext, enc, [&](const Image& x) { return disc(x); }).total;
    };
    return gradcheck(f, {in.novel, in.rewarp, in.synth}).rel_error;
  });
  run.run("gradients", "volume renderer", 1e-3, [] {
    const Generator g(detail::small_generator_config(), 18);
    Rng rng(19);
    const LatentCode w = g.sample_latent(rng).clone(true);
    const SamplingConfig sc{8};
    const Pose p = orbit_pose(0.2, 0.1, 2.7);
    const Tensor probe = detail::uniform_tensor({1, 3, 6, 6}, rng);
    const Tensor probe_d = detail::uniform_tensor({1, 1, 6, 6}, rng);
    auto f = [&] {
      const RenderOutput r = g.render(w, {p}, Intrinsics{}, 6, 6, sc);
      return add(sum(mul(r.image, probe)), sum(mul(r.depth, probe_d)));
    };
    std::vector<Tensor> inputs = g.params().tensors();
    inputs.push_back(w);
    return gradcheck(f, inputs, 1e-6, 6).rel_error;
  });
  run.run("gradients", "forward warp", 1e-3, [] {
    Rng rng(4);
    Tensor img = detail::uniform_tensor({1, 2, 8, 8}, rng).clone(true);
    Tensor depth = detail::uniform_tensor({1, 1, 8, 8}, rng, 2.0, 3.0).clone(true);
    const RelativePose rel = relative_pose(orbit_pose(0, 0, 2.7), orbit_pose(0.17, 0.05, 2.7));
    const Tensor probe = detail::uniform_tensor({1, 2, 8, 8}, rng);
    return gradcheck([&] { return sum(mul(forward_warp(img, depth, rel, Intrinsics{}).image, probe)); }, {img, depth},
                     1e-7, 48)
        .rel_error;
  });
  run.run("gradients", "FFC block", 1e-3, [] {
    SVINet net(detail::small_svinet_config(), 4);
    Rng rng(6);
    Tensor x = detail::uniform_tensor({1, net.config().feature_channels(), 4, 4}, rng).clone(true);
    Tensor w = detail::uniform_tensor({1, 4, 6}, rng).clone(true);
    const Tensor probe = detail::uniform_tensor(x.shape(), rng);
    return gradcheck([&] { return sum(mul(net.ffc_block(x, w, 1), probe)); }, {x, w}).rel_error;
  });
}

inline void loss_checks(std::vector<CheckResult>& out) {
  detail::CheckRunner run(out);
  run.run("losses", "default weights wired", 0.0, [] {
    const LossWeights w;
    return detail::bool_check(w.lambda_mse == 1.0 && w.lambda_lpips == 0.8 && w.lambda_id_wplus == 0.1 &&
                              w.lambda_l1 == 10.0 && w.lambda_p == 30.0 && w.lambda_id == 0.1 && w.lambda_rec == 1.0 &&
                              w.lambda_c == 0.1 && w.lambda_adv == 10.0);
  });
  run.run("losses", "generator adversarial at D = 0.5 is ln 2", 1e-4, [] {
    return std::fabs(loss_adv_g(Tensor::full({1}, 0.5)).item() - 0.6931);
  });
  run.run("losses", "SVINet total grouping", 0.0, [] {
    Rng rng(1);
    SVINetLossInputs in;
    in.novel = detail::uniform_tensor({1, 3, 8, 8}, rng);
    in.rewarp = detail::uniform_tensor({1, 3, 8, 8}, rng);
    in.real = detail::uniform_tensor({1, 3, 8, 8}, rng);
    in.synth = detail::uniform_tensor({1, 3, 8, 8}, rng);
    in.synth_target = detail::uniform_tensor({1, 3, 8, 8}, rng);
    const SVINetLossGroups g = svinet_loss_groups(in);
    const Tensor rec_pred = concat({in.rewarp, in.synth}, 0), rec_tgt = concat({in.real, in.synth_target}, 0);
    const Tensor c_pred = concat({in.novel, in.rewarp, in.synth}, 0);
    const Tensor c_tgt = concat({in.real, in.real, in.synth_target}, 0);
    return detail::bool_check(g.rec_pred.data() == rec_pred.data() && g.rec_target.data() == rec_tgt.data() &&
                              g.c_pred.data() == c_pred.data() && g.c_target.data() == c_tgt.data() &&
                              g.adv_fake.data() == c_pred.data());
  });
  run.run("losses", "weighted total hand case", 1e-12, [] {
    LossWeights w;
    const Tensor t = weighted_svinet_total(Tensor::scalar(2.0), Tensor::scalar(1.0), Tensor::scalar(0.5), w);
    return std::fabs(t.item() - (2.0 + 0.1 + 5.0));
  });
}

inline std::vector<CheckResult> run_selfcheck(const SelfCheckOptions& opt = {}) {
  std::vector<CheckResult> out;
  geometry_checks(out);
  rendering_checks(out);
  warping_checks(out);
  svinet_checks(out, opt);
  gradient_checks(out);
  loss_checks(out);
  return out;
}

inline bool all_passed(const std::vector<CheckResult>& r) {
  for (const CheckResult& c : r) {
    if (!c.passed) return false;
  }
  return !r.empty();
}

inline void print_check_table(std::FILE* f, const std::vector<CheckResult>& results) {
  std::fprintf(f, "%-10s %-48s %12s %12s %8s  %s\n", "group", "check", "value", "threshold", "time[s]", "status");
  for (const CheckResult& r : results) {
    std::fprintf(f, "%-10s %-48s %12.4g %12.4g %8.2f  %s\n", r.group.c_str(), r.name.c_str(), r.value, r.threshold,
                 r.seconds, r.passed ? "PASS" : "FAIL");
  }
}

}  // namespace warpfill
