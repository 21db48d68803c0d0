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

// Toy tri-plane generator and volumetric renderer.
//
// A latent code w+ [N, L, d] drives a small style-modulated synthesis network
// that emits three axis-aligned feature planes (XY, XZ, YZ). A point is
// decoded by bilinearly sampling each plane, summing the features and running
// a two-layer perceptron to (density, rgb). Rays are composited with the
// standard emission-absorption quadrature; depth uses the same weights with
// sample distances in place of colours.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "warpfill/core/nn.hpp"
#include "warpfill/core/ops.hpp"
#include "warpfill/core/params.hpp"
#include "warpfill/core/rng.hpp"
#include "warpfill/geometry.hpp"

namespace warpfill {

using Image = Tensor;     // [N, 3, H, W], values in [-1, 1] unless stated otherwise
using DepthMap = Tensor;  // [N, 1, H, W], distance along each pixel's unit ray
using LatentCode = Tensor;  // [N, L, d], a code in W+
using NoiseInput = Tensor;  // [N, 3, R, R]
using TriPlane = Tensor;    // [N, 3, C, R, R]

struct GeneratorConfig {
  int levels = 8;          // L
  int latent_dim = 64;     // d
  int plane_channels = 16; // C
  int plane_res = 32;      // R
  int synthesis_channels = 32;
  int decoder_hidden = 32;
  double box_half_extent = 1.0;
  // Density = density_scale * smooth_relu(decoder + prior_strength * (prior_radius - |p|)).
  double prior_strength = 60.0;
  double prior_radius = 0.5;
  double density_knee = 1.0;
  double density_scale = 1.0;  // multiplies the nonnegative density
  double noise_strength_init = 0.1;
  double plane_gain = 5.0;         // output gain of the plane projection layer
  double decoder_out_gain = 2.0;   // init gain of the decoder output layer
  double demod_eps = 1e-8;
};

struct SamplingConfig {
  int n_samples = 32;
  double near = 1.35;  // 0.5 * radius for the default radius 2.7
  double far = 4.05;   // 1.5 * radius
  bool stratified = false;
  double far_gap = 0.0;     // last delta; <= 0 means the regular bin width
  bool normalize_depth = true;
  double weight_eps = 1e-3;

  void validate() const {
    if (n_samples < 1) throw std::invalid_argument("SamplingConfig: n_samples must be >= 1");
    if (!(near > 0.0 && near < far)) throw std::invalid_argument("SamplingConfig: need 0 < near < far");
  }
  double bin() const { return (far - near) / n_samples; }
};

struct RadianceSample {
  double sigma = 0.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
};

// C1 nonnegative map: 0 below zero, quadratic on [0, knee], linear above.
inline double smooth_relu(double x, double knee) {
  if (x <= 0.0) return 0.0;
  if (x < knee) return 0.5 * x * x / knee;
  return x - 0.5 * knee;
}
inline double smooth_relu_grad(double x, double knee) {
  if (x <= 0.0) return 0.0;
  if (x < knee) return x / knee;
  return 1.0;
}

// Sample distances t_i and spacings delta_i along one ray.
inline void sample_distances(const SamplingConfig& cfg, Rng* rng, std::vector<double>& t, std::vector<double>& delta) {
  const int n = cfg.n_samples;
  const double bin = cfg.bin();
  t.resize(static_cast<std::size_t>(n));
  delta.resize(t.size());
  for (int i = 0; i < n; ++i) {
    const double jitter = (cfg.stratified && rng) ? rng->uniform() : 0.5;
    t[i] = cfg.near + (i + jitter) * bin;
  }
  for (int i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
  delta[n - 1] = cfg.far_gap > 0.0 ? cfg.far_gap : bin;
}

struct RayComposite {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double depth = 0.0;
  double raw_depth = 0.0;
  double accumulated = 0.0;
};

// Emission-absorption compositing of pre-evaluated samples.
//   w_i = T_i (1 - exp(-sigma_i delta_i)),  T_i = exp(-sum_{j<i} sigma_j delta_j)
inline RayComposite composite(const std::vector<RadianceSample>& s, const std::vector<double>& t,
                              const std::vector<double>& delta, const SamplingConfig& cfg,
                              std::vector<double>* weights = nullptr) {
  RayComposite out;
  double optical = 0.0;
  if (weights) weights->resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double trans = std::exp(-optical);
    const double w = trans * (1.0 - std::exp(-s[i].sigma * delta[i]));
    if (weights) (*weights)[i] = w;
    out.color += w * s[i].rgb;
    out.raw_depth += w * t[i];
    out.accumulated += w;
    optical += s[i].sigma * delta[i];
  }
  if (!cfg.normalize_depth) {
    out.depth = out.raw_depth;
  } else {
    out.depth = out.accumulated >= cfg.weight_eps ? out.raw_depth / out.accumulated : cfg.far;
  }
  return out;
}

using RadianceField = std::function<RadianceSample(const Vec3&)>;

// Renders any queryable field; returns an [1, 3, H, W] tensor of raw composited
// colour (background 0) without gradient tracking.
inline Tensor render_color(const RadianceField& field, const RayBundle& rays, const SamplingConfig& cfg) {
  cfg.validate();
  const int h = rays.height, w = rays.width;
  Tensor out = Tensor::zeros({1, 3, h, w});
  std::vector<double> t, delta;
  sample_distances(cfg, nullptr, t, delta);
  std::vector<RadianceSample> s(t.size());
  for (int p = 0; p < h * w; ++p) {
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = field(rays.origins[p] + t[i] * rays.directions[p]);
    const RayComposite c = composite(s, t, delta, cfg);
    for (int ch = 0; ch < 3; ++ch) out.data()[static_cast<std::size_t>(ch) * h * w + p] = c.color[ch];
  }
  return out;
}

inline DepthMap render_depth(const RadianceField& field, const RayBundle& rays, const SamplingConfig& cfg) {
  cfg.validate();
  const int h = rays.height, w = rays.width;
  Tensor out = Tensor::zeros({1, 1, h, w});
  std::vector<double> t, delta;
  sample_distances(cfg, nullptr, t, delta);
  std::vector<RadianceSample> s(t.size());
  for (int p = 0; p < h * w; ++p) {
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = field(rays.origins[p] + t[i] * rays.directions[p]);
    out.data()[p] = composite(s, t, delta, cfg).depth;
  }
  return out;
}

namespace detail {

struct BilinearTap {
  int idx[4];
  double w[4];
};

// Grid coordinate of a point component; nodes sit at -B, ..., +B.
inline double plane_coord(double v, double half_extent, int res) {
  const double c = std::clamp(v, -half_extent, half_extent);
  return (c + half_extent) / (2.0 * half_extent) * (res - 1);
}

inline BilinearTap bilinear_tap(double gx, double gy, int res) {
  int x0 = std::min(static_cast<int>(std::floor(gx)), res - 2);
  int y0 = std::min(static_cast<int>(std::floor(gy)), res - 2);
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  const double fx = gx - x0, fy = gy - y0;
  BilinearTap tap;
  tap.idx[0] = y0 * res + x0;
  tap.idx[1] = y0 * res + x0 + 1;
  tap.idx[2] = (y0 + 1) * res + x0;
  tap.idx[3] = (y0 + 1) * res + x0 + 1;
  tap.w[0] = (1 - fx) * (1 - fy);
  tap.w[1] = fx * (1 - fy);
  tap.w[2] = (1 - fx) * fy;
  tap.w[3] = fx * fy;
  return tap;
}

// The three plane projections of a point: XY, XZ, YZ.
inline void triplane_taps(const Vec3& p, double half_extent, int res, BilinearTap taps[3]) {
  const double gx = plane_coord(p.x(), half_extent, res);
  const double gy = plane_coord(p.y(), half_extent, res);
  const double gz = plane_coord(p.z(), half_extent, res);
  taps[0] = bilinear_tap(gx, gy, res);
  taps[1] = bilinear_tap(gx, gz, res);
  taps[2] = bilinear_tap(gy, gz, res);
}

}  // namespace detail

// Decoder weights, shared across all samples.
struct DecoderView {
  const double* w1;  // [hidden, C]
  const double* b1;  // [hidden]
  const double* w2;  // [4, hidden]
  const double* b2;  // [4]
  int channels;
  int hidden;
};

// Everything one sample's backward pass needs.
struct SampleTrace {
  std::vector<double> feature;  // [C]
  std::vector<double> pre;      // [hidden]
  std::vector<double> act;      // [hidden]
  double density_arg = 0.0;
  RadianceSample sample;
  detail::BilinearTap taps[3];
};

// Decodes a point against channel-last planes [3][R*R][C].
inline void decode_point(const double* planes_cl, const DecoderView& dec, const GeneratorConfig& cfg,
                         const Vec3& p, SampleTrace& tr) {
  const int c = dec.channels, hid = dec.hidden, res = cfg.plane_res;
  tr.feature.assign(static_cast<std::size_t>(c), 0.0);
  detail::triplane_taps(p, cfg.box_half_extent, res, tr.taps);
  for (int pl = 0; pl < 3; ++pl) {
    const double* base = planes_cl + static_cast<std::size_t>(pl) * res * res * c;
    for (int q = 0; q < 4; ++q) {
      const double wq = tr.taps[pl].w[q];
      if (wq == 0.0) continue;
      const double* f = base + static_cast<std::size_t>(tr.taps[pl].idx[q]) * c;
      for (int k = 0; k < c; ++k) tr.feature[k] += wq * f[k];
    }
  }
  tr.pre.resize(static_cast<std::size_t>(hid));
  tr.act.resize(static_cast<std::size_t>(hid));
  for (int j = 0; j < hid; ++j) {
    double s = dec.b1[j];
    const double* row = dec.w1 + static_cast<std::size_t>(j) * c;
    for (int k = 0; k < c; ++k) s += row[k] * tr.feature[k];
    tr.pre[j] = s;
    tr.act[j] = s > 0.0 ? s : 0.2 * s;
  }
  double o[4];
  for (int r = 0; r < 4; ++r) {
    double s = dec.b2[r];
    const double* row = dec.w2 + static_cast<std::size_t>(r) * hid;
    for (int j = 0; j < hid; ++j) s += row[j] * tr.act[j];
    o[r] = s;
  }
  tr.density_arg = o[0] + cfg.prior_strength * (cfg.prior_radius - p.norm());
  tr.sample.sigma = cfg.density_scale * smooth_relu(tr.density_arg, cfg.density_knee);
  for (int r = 0; r < 3; ++r) tr.sample.rgb[r] = sigmoid_scalar(o[r + 1]);
}

// Per-sample rays and sample distances for one batch element.
struct RenderRays {
  RayBundle rays;
  std::vector<double> t;      // [n_samples] shared by all rays of this view
  std::vector<double> delta;  // [n_samples]
};

// Differentiable rendering of tri-planes [N, 3, C, R, R] with decoder
// parameters (w1, b1, w2, b2). Returns [N, 5, H, W]: rgb in [0, 1], depth,
// accumulated weight.
inline Tensor render_triplane(const TriPlane& planes, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                              const Tensor& b2, const std::vector<RenderRays>& views, const GeneratorConfig& gcfg,
                              const SamplingConfig& scfg) {
  scfg.validate();
  const int n = planes.dim(0), c = planes.dim(2), res = planes.dim(3);
  if (planes.dim(1) != 3 || c != gcfg.plane_channels || res != gcfg.plane_res || planes.dim(4) != res) {
    throw std::invalid_argument("render_triplane: planes shape " + shape_str(planes.shape()) + " does not match config");
  }
  if (static_cast<int>(views.size()) != n) throw std::invalid_argument("render_triplane: one ray set per sample required");
  const int h = views[0].rays.height, w = views[0].rays.width;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t plane_sz = static_cast<std::size_t>(3) * c * res * res;
  const int hid = w1.dim(0);

  // Channel-last copy for cache-friendly gathers.
  auto to_channel_last = [c, res](const double* src, double* dst) {
    const std::size_t rr = static_cast<std::size_t>(res) * res;
    for (int pl = 0; pl < 3; ++pl) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t q = 0; q < rr; ++q) dst[(pl * rr + q) * c + k] = src[(static_cast<std::size_t>(pl) * c + k) * rr + q];
      }
    }
  };

  std::vector<double> out(static_cast<std::size_t>(n) * 5 * hw);
  std::vector<double> cl(plane_sz);
  DecoderView dec{w1.data().data(), b1.data().data(), w2.data().data(), b2.data().data(), c, hid};
  SampleTrace tr;
  std::vector<RadianceSample> samples(static_cast<std::size_t>(scfg.n_samples));
  for (int b = 0; b < n; ++b) {
    to_channel_last(planes.data().data() + b * plane_sz, cl.data());
    const RenderRays& v = views[b];
    for (std::size_t p = 0; p < hw; ++p) {
      for (int i = 0; i < scfg.n_samples; ++i) {
        decode_point(cl.data(), dec, gcfg, v.rays.origins[p] + v.t[i] * v.rays.directions[p], tr);
        samples[i] = tr.sample;
      }
      const RayComposite rc = composite(samples, v.t, v.delta, scfg);
      double* o = out.data() + static_cast<std::size_t>(b) * 5 * hw;
      o[p] = rc.color[0];
      o[hw + p] = rc.color[1];
      o[2 * hw + p] = rc.color[2];
      o[3 * hw + p] = rc.depth;
      o[4 * hw + p] = rc.accumulated;
    }
  }

  return detail::make_result(
      {n, 5, h, w}, std::move(out), {planes, w1, b1, w2, b2},
      [planes, w1, b1, w2, b2, views, gcfg, scfg, n, c, res, hid, hw, plane_sz, to_channel_last](Node& self) {
        const int ns = scfg.n_samples;
        std::vector<double> cl(plane_sz), gcl(plane_sz);
        std::vector<double> gw1(w1.numel(), 0.0), gb1(b1.numel(), 0.0), gw2(w2.numel(), 0.0), gb2(b2.numel(), 0.0);
        DecoderView dec{w1.data().data(), b1.data().data(), w2.data().data(), b2.data().data(), c, hid};
        std::vector<SampleTrace> traces(static_cast<std::size_t>(ns));
        std::vector<double> wts(static_cast<std::size_t>(ns)), q(static_cast<std::size_t>(ns)), trans(static_cast<std::size_t>(ns) + 1);
        std::vector<double> dact(static_cast<std::size_t>(hid));
        for (int b = 0; b < n; ++b) {
          to_channel_last(planes.data().data() + b * plane_sz, cl.data());
          std::fill(gcl.begin(), gcl.end(), 0.0);
          const RenderRays& v = views[b];
          const double* g = self.grad.data() + static_cast<std::size_t>(b) * 5 * hw;
          const double* val = self.value.data() + static_cast<std::size_t>(b) * 5 * hw;
          for (std::size_t p = 0; p < hw; ++p) {
            const double gr = g[p], gg = g[hw + p], gbl = g[2 * hw + p], gd = g[3 * hw + p], gacc = g[4 * hw + p];
            if (gr == 0.0 && gg == 0.0 && gbl == 0.0 && gd == 0.0 && gacc == 0.0) continue;
            std::vector<RadianceSample> samples(static_cast<std::size_t>(ns));
            for (int i = 0; i < ns; ++i) {
              decode_point(cl.data(), dec, gcfg, v.rays.origins[p] + v.t[i] * v.rays.directions[p], traces[i]);
              samples[i] = traces[i].sample;
            }
            const RayComposite rc = composite(samples, v.t, v.delta, scfg, &wts);
            (void)val;
            // Upstream gradient on the raw depth sum and on the weight sum.
            double g_raw = 0.0, g_sum = gacc;
            if (!scfg.normalize_depth) {
              g_raw = gd;
            } else if (rc.accumulated >= scfg.weight_eps) {
              g_raw = gd / rc.accumulated;
              g_sum += -gd * rc.raw_depth / (rc.accumulated * rc.accumulated);
            }
            double optical = 0.0;
            for (int i = 0; i < ns; ++i) {
              trans[i] = std::exp(-optical);
              optical += samples[i].sigma * v.delta[i];
              q[i] = gr * samples[i].rgb[0] + gg * samples[i].rgb[1] + gbl * samples[i].rgb[2] + g_raw * v.t[i] + g_sum;
            }
            trans[ns] = std::exp(-optical);
            // dL/dsigma_i = delta_i (T_{i+1} q_i - sum_{k>i} w_k q_k)
            double suffix = 0.0;
            for (int i = ns - 1; i >= 0; --i) {
              const SampleTrace& tr = traces[i];
              const double dsigma = v.delta[i] * (trans[i + 1] * q[i] - suffix);
              suffix += wts[i] * q[i];
              double dout[4];
              dout[0] = dsigma * gcfg.density_scale * smooth_relu_grad(tr.density_arg, gcfg.density_knee);
              const double gc[3] = {gr, gg, gbl};
              for (int r = 0; r < 3; ++r) {
                const double s = tr.sample.rgb[r];
                dout[r + 1] = wts[i] * gc[r] * s * (1.0 - s);
              }
              if (dout[0] == 0.0 && dout[1] == 0.0 && dout[2] == 0.0 && dout[3] == 0.0) continue;
              for (int r = 0; r < 4; ++r) gb2[r] += dout[r];
              for (int j = 0; j < hid; ++j) {
                double s = 0.0;
                for (int r = 0; r < 4; ++r) {
                  gw2[static_cast<std::size_t>(r) * hid + j] += dout[r] * tr.act[j];
                  s += dout[r] * dec.w2[static_cast<std::size_t>(r) * hid + j];
                }
                dact[j] = s * (tr.pre[j] > 0.0 ? 1.0 : 0.2);
              }
              for (int j = 0; j < hid; ++j) {
                if (dact[j] == 0.0) continue;
                gb1[j] += dact[j];
                double* grow = gw1.data() + static_cast<std::size_t>(j) * c;
                for (int k = 0; k < c; ++k) grow[k] += dact[j] * tr.feature[k];
              }
              // Feature gradient, scattered onto the plane taps.
              for (int k = 0; k < c; ++k) {
                double df = 0.0;
                for (int j = 0; j < hid; ++j) df += dact[j] * dec.w1[static_cast<std::size_t>(j) * c + k];
                if (df == 0.0) continue;
                for (int pl = 0; pl < 3; ++pl) {
                  double* base = gcl.data() + static_cast<std::size_t>(pl) * res * res * c;
                  for (int qq = 0; qq < 4; ++qq) {
                    if (tr.taps[pl].w[qq] != 0.0) base[static_cast<std::size_t>(tr.taps[pl].idx[qq]) * c + k] += tr.taps[pl].w[qq] * df;
                  }
                }
              }
            }
          }
          if (planes.requires_grad()) {
            auto& gp = planes.node()->grad_buffer();
            const std::size_t rr = static_cast<std::size_t>(res) * res;
            for (int pl = 0; pl < 3; ++pl) {
              for (int k = 0; k < c; ++k) {
                for (std::size_t qq = 0; qq < rr; ++qq) gp[b * plane_sz + (static_cast<std::size_t>(pl) * c + k) * rr + qq] += gcl[(pl * rr + qq) * c + k];
              }
            }
          }
        }
        auto flush = [](const Tensor& t, const std::vector<double>& g) {
          if (!t.requires_grad()) return;
          auto& buf = t.node()->grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
        };
        flush(w1, gw1);
        flush(b1, gb1);
        flush(w2, gw2);
        flush(b2, gb2);
      });
}

struct RenderOutput {
  Image image;      // [N, 3, H, W] in [-1, 1]
  DepthMap depth;   // [N, 1, H, W]
  Tensor accumulated;  // [N, 1, H, W]
};

class Generator {
 public:
  explicit Generator(GeneratorConfig cfg = {}, std::uint64_t seed = 1) : cfg_(cfg) {
    Rng rng(seed);
    const int ch = cfg_.synthesis_channels, d = cfg_.latent_dim;
    const int base = cfg_.plane_res / 4;
    if (base < 1 || cfg_.plane_res % 4) throw std::invalid_argument("Generator: plane_res must be a multiple of 4");
    if (cfg_.levels < 2) throw std::invalid_argument("Generator: need at least two latent levels");
    const_input_ = params_.add("gen.const", {1, ch, base, base}, 0.0);
    for (double& v : const_input_.data()) v = rng.normal();
    // Stage of each 3x3 layer: 0 at R/4, 1 at R/2, 2 at R.
    const int n_conv = cfg_.levels - 1;
    for (int i = 0; i < n_conv; ++i) {
      Layer l;
      l.stage = (3 * i) / n_conv;
      const std::string p = "gen.conv" + std::to_string(i);
      l.affine_w = params_.add_normal(p + ".affine.w", {ch, d}, rng, 0.5);
      l.affine_b = params_.add(p + ".affine.b", {ch}, 1.0);
      l.weight = params_.add_normal(p + ".w", {ch, ch, 3, 3}, rng, 1.0);
      l.bias = params_.add(p + ".b", {ch}, 0.0);
      layers_.push_back(l);
    }
    const int out_ch = 3 * cfg_.plane_channels;
    to_planes_.affine_w = params_.add_normal("gen.to_planes.affine.w", {ch, d}, rng, 0.5);
    to_planes_.affine_b = params_.add("gen.to_planes.affine.b", {ch}, 1.0);
    to_planes_.weight = params_.add_normal("gen.to_planes.w", {out_ch, ch, 1, 1}, rng, 1.0);
    to_planes_.bias = params_.add("gen.to_planes.b", {out_ch}, 0.0);
    noise_strength_ = params_.add("gen.noise_strength", {3 * cfg_.plane_channels}, cfg_.noise_strength_init);
    dec_w1_ = params_.add_normal("dec.w1", {cfg_.decoder_hidden, cfg_.plane_channels}, rng, 1.0);
    dec_b1_ = params_.add("dec.b1", {cfg_.decoder_hidden}, 0.0);
    dec_w2_ = params_.add_normal("dec.w2", {4, cfg_.decoder_hidden}, rng, cfg_.decoder_out_gain);
    dec_b2_ = params_.add("dec.b2", {4}, 0.0);
    Rng nrng(seed ^ 0x9e3779b97f4a7c15ULL);
    default_noise_ = Tensor::zeros({1, 3, cfg_.plane_res, cfg_.plane_res});
    for (double& v : default_noise_.data()) v = nrng.normal();
  }

  const GeneratorConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Fixed per-plane noise maps, repeated for a batch of n.
  NoiseInput default_noise(int n = 1) const {
    std::vector<Tensor> parts(static_cast<std::size_t>(n), default_noise_);
    return n == 1 ? default_noise_.detach() : concat(parts, 0).detach();
  }

  Tensor level(const LatentCode& w, int l) const {
    return reshape(slice(w, 1, l, 1), {w.dim(0), cfg_.latent_dim});
  }

  TriPlane generate_triplane(const LatentCode& w, const NoiseInput& noise) const {
    if (w.rank() != 3 || w.dim(1) != cfg_.levels || w.dim(2) != cfg_.latent_dim) {
      throw std::invalid_argument("generate_triplane: latent shape " + shape_str(w.shape()) + " does not match config");
    }
    const int n = w.dim(0), r = cfg_.plane_res, c = cfg_.plane_channels;
    if (noise.rank() != 4 || noise.dim(0) != n || noise.dim(1) != 3 || noise.dim(2) != r || noise.dim(3) != r) {
      throw std::invalid_argument("generate_triplane: noise shape " + shape_str(noise.shape()) + " does not match");
    }
    std::vector<Tensor> rep(static_cast<std::size_t>(n), const_input_);
    Tensor x = n == 1 ? const_input_ : concat(rep, 0);
    int stage = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      while (stage < l.stage) {
        x = upsample2x(x);
        ++stage;
      }
      Tensor s = linear(level(w, static_cast<int>(i)), l.affine_w, l.affine_b);
      x = scale(leaky_relu(modulated_conv2d(x, l.weight, l.bias, s, cfg_.demod_eps)), std::sqrt(2.0));
    }
    while (stage < 2) {
      x = upsample2x(x);
      ++stage;
    }
    Tensor s = linear(level(w, cfg_.levels - 1), to_planes_.affine_w, to_planes_.affine_b);
    s = scale(s, cfg_.plane_gain / std::sqrt(static_cast<double>(cfg_.synthesis_channels)));
    Tensor planes = modulated_conv2d(x, to_planes_.weight, to_planes_.bias, s, cfg_.demod_eps, false);
    // Per-plane noise with a learned strength per output channel.
    Tensor noise_rep = repeat_noise(noise);
    Tensor strength = expand_spatial(reshape(repeat_rows(noise_strength_, n), {n, 3 * c}), r, r);
    planes = add(planes, mul(strength, noise_rep));
    return reshape(planes, {n, 3, c, r, r});
  }

  // Ray sets for a batch of poses.
  std::vector<RenderRays> make_rays(const std::vector<Pose>& poses, const Intrinsics& k, int h, int w,
                                    const SamplingConfig& scfg, Rng* rng = nullptr) const {
    std::vector<RenderRays> out;
    for (const Pose& p : poses) {
      RenderRays rr;
      rr.rays = rays_for_camera(k, p, h, w);
      sample_distances(scfg, rng, rr.t, rr.delta);
      out.push_back(std::move(rr));
    }
    return out;
  }

  Tensor render_planes_raw(const TriPlane& planes, const std::vector<RenderRays>& views, const SamplingConfig& scfg) const {
    return render_triplane(planes, dec_w1_, dec_b1_, dec_w2_, dec_b2_, views, cfg_, scfg);
  }

  RenderOutput render_planes(const TriPlane& planes, const std::vector<Pose>& poses, const Intrinsics& k, int h, int w,
                             const SamplingConfig& scfg, Rng* rng = nullptr) const {
    Tensor raw = render_planes_raw(planes, make_rays(poses, k, h, w, scfg, rng), scfg);
    RenderOutput out;
    out.image = add_scalar(scale(slice(raw, 1, 0, 3), 2.0), -1.0);
    out.depth = slice(raw, 1, 3, 1);
    out.accumulated = slice(raw, 1, 4, 1);
    return out;
  }

  // R(G(w, n), c) for a batch of codes, one pose per code.
  RenderOutput render(const LatentCode& w, const std::vector<Pose>& poses, const Intrinsics& k, int h, int w_px,
                      const SamplingConfig& scfg, const NoiseInput& noise = Tensor(), Rng* rng = nullptr) const {
    const NoiseInput nz = noise.defined() ? noise : default_noise(w.dim(0));
    return render_planes(generate_triplane(w, nz), poses, k, h, w_px, scfg, rng);
  }

  // Non-differentiable point query against one sample's planes [1, 3, C, R, R].
  RadianceSample query_field(const TriPlane& planes, const Vec3& point) const {
    std::vector<double> cl = channel_last(planes, 0);
    DecoderView dec{dec_w1_.data().data(), dec_b1_.data().data(), dec_w2_.data().data(), dec_b2_.data().data(),
                    cfg_.plane_channels, cfg_.decoder_hidden};
    SampleTrace tr;
    decode_point(cl.data(), dec, cfg_, point, tr);
    return tr.sample;
  }

  // A queryable field bound to one sample's planes.
  RadianceField field(const TriPlane& planes, int index = 0) const {
    auto cl = std::make_shared<std::vector<double>>(channel_last(planes, index));
    auto dec_params = std::make_shared<std::vector<std::vector<double>>>(
        std::vector<std::vector<double>>{dec_w1_.data(), dec_b1_.data(), dec_w2_.data(), dec_b2_.data()});
    GeneratorConfig cfg = cfg_;
    return [cl, dec_params, cfg](const Vec3& p) {
      const auto& d = *dec_params;
      DecoderView dec{d[0].data(), d[1].data(), d[2].data(), d[3].data(), cfg.plane_channels, cfg.decoder_hidden};
      SampleTrace tr;
      decode_point(cl->data(), dec, cfg, p, tr);
      return tr.sample;
    };
  }

  Tensor decoder_w1() const { return dec_w1_; }
  Tensor decoder_b1() const { return dec_b1_; }
  Tensor decoder_w2() const { return dec_w2_; }
  Tensor decoder_b2() const { return dec_b2_; }

  // Latent sample from the toy latent space: one Gaussian code in W repeated
  // over all levels.
  LatentCode sample_latent(Rng& rng, int n = 1) const {
    Tensor w = Tensor::zeros({n, cfg_.levels, cfg_.latent_dim});
    for (int b = 0; b < n; ++b) {
      std::vector<double> z(static_cast<std::size_t>(cfg_.latent_dim));
      for (double& v : z) v = rng.normal();
      for (int l = 0; l < cfg_.levels; ++l) {
        std::copy(z.begin(), z.end(), w.data().begin() + (static_cast<std::size_t>(b) * cfg_.levels + l) * cfg_.latent_dim);
      }
    }
    return w;
  }

 private:
  struct Layer {
    int stage = 0;
    Tensor affine_w, affine_b, weight, bias;
  };

  std::vector<double> channel_last(const TriPlane& planes, int index) const {
    const int c = cfg_.plane_channels, res = cfg_.plane_res;
    const std::size_t rr = static_cast<std::size_t>(res) * res, plane_sz = 3 * c * rr;
    std::vector<double> cl(plane_sz);
    const double* src = planes.data().data() + index * plane_sz;
    for (int pl = 0; pl < 3; ++pl) {
      for (int k = 0; k < c; ++k) {
        for (std::size_t q = 0; q < rr; ++q) cl[(pl * rr + q) * c + k] = src[(static_cast<std::size_t>(pl) * c + k) * rr + q];
      }
    }
    return cl;
  }

  // [N, 3, R, R] noise -> [N, 3C, R, R], each plane's map shared by its C channels.
  Tensor repeat_noise(const NoiseInput& noise) const {
    std::vector<Tensor> parts;
    for (int pl = 0; pl < 3; ++pl) {
      Tensor one = slice(noise, 1, pl, 1);
      for (int k = 0; k < cfg_.plane_channels; ++k) parts.push_back(one);
    }
    return concat(parts, 1);
  }

  static Tensor repeat_rows(const Tensor& v, int n) {
    Tensor row = reshape(v, {1, static_cast<int>(v.numel())});
    if (n == 1) return row;
    std::vector<Tensor> parts(static_cast<std::size_t>(n), row);
    return concat(parts, 0);
  }

  GeneratorConfig cfg_;
  ParamSet params_;
  Tensor const_input_;
  std::vector<Layer> layers_;
  Layer to_planes_;
  Tensor noise_strength_;
  Tensor dec_w1_, dec_b1_, dec_w2_, dec_b2_;
  Tensor default_noise_;
};

struct SyntheticPair {
  Image source;       // I_s
  Image target;       // I_t
  DepthMap source_depth;  // D_s
};

// Two renders of one latent code at different poses plus the source depth.
inline SyntheticPair sample_synthetic_pair(const Generator& gen, const LatentCode& w_synth, const Pose& c_s,
                                           const Pose& c_t, const Intrinsics& k, int h, int w,
                                           const SamplingConfig& scfg) {
  NoGradGuard guard;
  const TriPlane planes = gen.generate_triplane(w_synth, gen.default_noise(w_synth.dim(0)));
  SyntheticPair pair;
  RenderOutput s = gen.render_planes(planes, {c_s}, k, h, w, scfg);
  RenderOutput t = gen.render_planes(planes, {c_t}, k, h, w, scfg);
  pair.source = s.image.detach();
  pair.target = t.image.detach();
  pair.source_depth = s.depth.detach();
  return pair;
}

}  // namespace warpfill
