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


// Depth-guided forward warping (softmax splatting), occlusion masks, initial
// hole filling and mirror-input preparation.
//
// Every source pixel is unprojected with its ray-distance depth, moved into the
// target camera and splatted onto the four surrounding target pixel centres
// with weight exp(-beta * z_target) times its bilinear footprint. Target pixels
// normalize by their accumulated weight; pixels whose accumulated footprint is
// below tau are holes (mask = 1, value 0).

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "warpfill/core/ops.hpp"
#include "warpfill/geometry.hpp"
#include "warpfill/generator.hpp"

namespace warpfill {

using OcclusionMask = Tensor;  // [N, 1, H, W], 1 marks holes

struct WarpConfig {
  double beta = 40.0 / 4.05;  // 40 / far for the default sampling range
  double tau = 0.05;          // hole threshold on the accumulated footprint
  double snap = 1e-9;         // splat positions this close to a pixel centre snap onto it
  double min_z = 1e-6;        // points closer than this to the target image plane are dropped

  static WarpConfig for_sampling(const SamplingConfig& s) {
    WarpConfig w;
    // Sharp enough that a surface 0.4 farther keeps about 2% of the weight
    // of the nearer one, while still blending samples from the same surface.
    w.beta = 40.0 / s.far;
    return w;
  }
};

struct WarpResult {
  Image image;          // [N, C, H, W]; holes are 0
  OcclusionMask mask;   // [N, 1, H, W] in {0, 1}
  Tensor weights;       // [N, 1, H, W] accumulated footprint (>= 0)
  DepthMap depth;       // [N, 1, H, W] splatted target ray distance; 0 in holes
};

// Ray distance of a pixel whose z-depth (along the optical axis) is `z`.
inline double zdepth_to_distance(double z, double u, double v, const Intrinsics& k) {
  return z * camera_direction(u, v, k).norm();
}

namespace detail {

struct SplatTap {
  int src;
  int tgt;
  double footprint;  // bilinear weight
  double a;          // omega * footprint
  double da_dd;      // derivative of a w.r.t. the source depth
};

// Splat geometry for one sample; taps are emitted in source-pixel order.
inline void splat_taps(const double* depth, const double* valid, int h, int w, const RelativePose& rel,
                       const Intrinsics& k, const WarpConfig& cfg, std::vector<SplatTap>& taps,
                       std::vector<double>* target_dist) {
  taps.clear();
  if (target_dist) target_dist->clear();
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const int s = j * w + i;
      if (valid && valid[s] <= 0.0) continue;
      const double d = depth[s];
      const Vec3 dir = camera_direction((i + 0.5) / w, (j + 0.5) / h, k).normalized();
      const Vec3 q = rel.apply(d * dir);
      const Vec3 dq = rel.R * dir;
      const double z = -q.z(), dz = -dq.z();
      if (!(z > cfg.min_z)) continue;
      double x = (k.cx + k.fx * q.x() / z) * w - 0.5;
      double y = (k.cy - k.fy * q.y() / z) * h - 0.5;
      if (!(x > -1.0 && x < w && y > -1.0 && y < h)) continue;
      const double dx = k.fx * w * (dq.x() * z - q.x() * dz) / (z * z);
      const double dy = -k.fy * h * (dq.y() * z - q.y() * dz) / (z * z);
      const double rx = std::round(x), ry = std::round(y);
      if (std::fabs(x - rx) < cfg.snap) x = rx;
      if (std::fabs(y - ry) < cfg.snap) y = ry;
      const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
      const double fx = x - x0, fy = y - y0;
      const double omega = std::exp(-cfg.beta * z);
      const double domega = -cfg.beta * dz * omega;
      const double dist = q.norm();
      for (int c = 0; c < 4; ++c) {
        const int tx = x0 + (c & 1), ty = y0 + (c >> 1);
        if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
        const double bx = (c & 1) ? fx : 1.0 - fx, by = (c >> 1) ? fy : 1.0 - fy;
        const double b = bx * by;
        if (b <= 0.0) continue;
        const double dbx = (c & 1) ? dx : -dx, dby = (c >> 1) ? dy : -dy;
        const double db = dbx * by + bx * dby;
        taps.push_back({s, ty * w + tx, b, omega * b, domega * b + omega * db});
        if (target_dist) target_dist->push_back(dist);
      }
    }
  }
}

}  // namespace detail

// Warps `image` [N, C, H, W] with ray-distance `depth` [N, 1, H, W] through
// `rel` (one per sample, or one shared). `source_valid` [N, 1, H, W], when
// given, excludes source pixels with value <= 0 from splatting.
inline WarpResult forward_warp(const Image& image, const DepthMap& depth, const std::vector<RelativePose>& rel,
                               const Intrinsics& k, const WarpConfig& cfg = {},
                               const Tensor& source_valid = Tensor()) {
  if (image.rank() != 4 || depth.rank() != 4 || depth.dim(1) != 1 || image.dim(0) != depth.dim(0) ||
      image.dim(2) != depth.dim(2) || image.dim(3) != depth.dim(3)) {
    throw std::invalid_argument("forward_warp: image " + shape_str(image.shape()) + " and depth " +
                                shape_str(depth.shape()) + " do not agree");
  }
  if (source_valid.defined() && source_valid.shape() != depth.shape()) {
    throw std::invalid_argument("forward_warp: validity mask must match the depth shape");
  }
  const int n = image.dim(0), ch = image.dim(1), h = image.dim(2), w = image.dim(3);
  if (rel.size() != 1 && static_cast<int>(rel.size()) != n) {
    throw std::invalid_argument("forward_warp: need one relative pose per sample or one shared pose");
  }
  for (double d : depth.data()) {
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("forward_warp: depth must be finite and positive");
  }
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> out(image.numel(), 0.0);
  Tensor mask = Tensor::zeros({n, 1, h, w});
  Tensor weights = Tensor::zeros({n, 1, h, w});
  Tensor tdepth = Tensor::zeros({n, 1, h, w});
  // Per-sample taps and per-target normalizers, kept for the backward pass.
  auto taps = std::make_shared<std::vector<std::vector<detail::SplatTap>>>(n);
  auto norm = std::make_shared<std::vector<std::vector<double>>>(n);
  std::vector<double> dist;
  for (int b = 0; b < n; ++b) {
    auto& tp = (*taps)[b];
    detail::splat_taps(depth.data().data() + b * hw, source_valid.defined() ? source_valid.data().data() + b * hw : nullptr,
                       h, w, rel.size() == 1 ? rel[0] : rel[b], k, cfg, tp, &dist);
    std::vector<double> asum(hw, 0.0), footprint(hw, 0.0);
    for (const auto& t : tp) {
      asum[t.tgt] += t.a;
      footprint[t.tgt] += t.footprint;
    }
    auto& nm = (*norm)[b];
    nm.assign(hw, 0.0);
    double* mk = mask.data().data() + b * hw;
    double* wt = weights.data().data() + b * hw;
    double* td = tdepth.data().data() + b * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      wt[p] = footprint[p];
      if (footprint[p] < cfg.tau) {
        mk[p] = 1.0;
      } else {
        nm[p] = asum[p];
      }
    }
    const double* src = image.data().data() + static_cast<std::size_t>(b) * ch * hw;
    double* dst = out.data() + static_cast<std::size_t>(b) * ch * hw;
    for (std::size_t q = 0; q < tp.size(); ++q) {
      const auto& t = tp[q];
      if (nm[t.tgt] == 0.0) continue;
      const double a = t.a / nm[t.tgt];
      for (int c = 0; c < ch; ++c) dst[c * hw + t.tgt] += a * src[c * hw + t.src];
      td[t.tgt] += a * dist[q];
    }
  }
  WarpResult res;
  res.mask = mask;
  res.weights = weights;
  res.depth = tdepth;
  res.image = detail::make_result(
      image.shape(), std::move(out), {image, depth}, [image, depth, taps, norm, n, ch, hw](Node& self) {
        for (int b = 0; b < n; ++b) {
          const auto& tp = (*taps)[b];
          const auto& nm = (*norm)[b];
          const double* g = self.grad.data() + static_cast<std::size_t>(b) * ch * hw;
          const double* y = self.value.data() + static_cast<std::size_t>(b) * ch * hw;
          const double* x = image.data().data() + static_cast<std::size_t>(b) * ch * hw;
          for (const auto& t : tp) {
            if (nm[t.tgt] == 0.0) continue;
            const double inv = 1.0 / nm[t.tgt];
            if (image.requires_grad()) {
              auto& gi = image.node()->grad_buffer();
              for (int c = 0; c < ch; ++c) gi[b * ch * hw + c * hw + t.src] += t.a * inv * g[c * hw + t.tgt];
            }
            if (depth.requires_grad()) {
              // y_t = sum_s a_s x_s / A_t  =>  dy_t/da_s = (x_s - y_t) / A_t
              double s = 0.0;
              for (int c = 0; c < ch; ++c) s += g[c * hw + t.tgt] * (x[c * hw + t.src] - y[c * hw + t.tgt]);
              depth.node()->grad_buffer()[b * hw + t.src] += s * inv * t.da_dd;
            }
          }
        }
      });
  return res;
}

inline WarpResult forward_warp(const Image& image, const DepthMap& depth, const RelativePose& rel, const Intrinsics& k,
                               const WarpConfig& cfg = {}, const Tensor& source_valid = Tensor()) {
  return forward_warp(image, depth, std::vector<RelativePose>{rel}, k, cfg, source_valid);
}

// Warps an already-warped view back to its source camera. The splatted depth
// of `warped` drives the reverse warp; its holes fall back to `fallback_depth`
// (typically the generator's depth at the novel view) and are not splatted.
inline WarpResult rewarp(const WarpResult& warped, const DepthMap& fallback_depth, const std::vector<RelativePose>& back,
                         const Intrinsics& k, const WarpConfig& cfg = {}) {
  if (fallback_depth.shape() != warped.depth.shape()) {
    throw std::invalid_argument("rewarp: fallback depth shape " + shape_str(fallback_depth.shape()) + " does not match");
  }
  Tensor depth = Tensor::zeros(warped.depth.shape());
  Tensor valid = Tensor::zeros(warped.depth.shape());
  for (std::size_t i = 0; i < depth.numel(); ++i) {
    const bool hole = warped.mask.data()[i] > 0.5;
    depth.data()[i] = hole ? fallback_depth.data()[i] : warped.depth.data()[i];
    valid.data()[i] = hole ? 0.0 : 1.0;
  }
  return forward_warp(warped.image, depth, back, k, cfg, valid);
}

// Pixels of the source view that are also visible from the target view: the
// reprojected point lands inside the target frame and its distance agrees with
// the target depth map (nearest pixel) within `rel_tol`. Returns [N, 1, H, W].
inline Tensor covisibility_mask(const DepthMap& src_depth, const std::vector<Pose>& src, const DepthMap& dst_depth,
                                const std::vector<Pose>& dst, const Intrinsics& k, double rel_tol = 0.05) {
  if (src_depth.shape() != dst_depth.shape() || src_depth.rank() != 4 || src_depth.dim(1) != 1) {
    throw std::invalid_argument("covisibility_mask: depth maps must share an [N,1,H,W] shape");
  }
  const int n = src_depth.dim(0), h = src_depth.dim(2), w = src_depth.dim(3);
  if (static_cast<int>(src.size()) != n || static_cast<int>(dst.size()) != n) {
    throw std::invalid_argument("covisibility_mask: need one pose pair per sample");
  }
  Tensor out = Tensor::zeros(src_depth.shape());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        const std::size_t p = b * hw + static_cast<std::size_t>(j) * w + i;
        const Vec3 dir = camera_direction((i + 0.5) / w, (j + 0.5) / h, k).normalized();
        const Vec3 x = src[b].R * (src_depth.data()[p] * dir) + src[b].t;
        const Projection pr = project(x, k, dst[b]);
        if (pr.behind) continue;
        const int ti = static_cast<int>(std::floor(pr.u * w)), tj = static_cast<int>(std::floor(pr.v * h));
        if (ti < 0 || ti >= w || tj < 0 || tj >= h) continue;
        const double dist = (x - dst[b].t).norm();
        if (std::fabs(dist - dst_depth.data()[b * hw + static_cast<std::size_t>(tj) * w + ti]) <= rel_tol * dist) {
          out.data()[p] = 1.0;
        }
      }
    }
  }
  return out;
}

// I_initial = I_warp + M * I_recon.
inline Image initial_fill(const WarpResult& warped, const Image& novel_recon) {
  if (warped.image.shape() != novel_recon.shape()) {
    throw std::invalid_argument("initial_fill: reconstruction shape " + shape_str(novel_recon.shape()) +
                                " does not match warped image " + shape_str(warped.image.shape()));
  }
  const int n = novel_recon.dim(0), c = novel_recon.dim(1), h = novel_recon.dim(2), w = novel_recon.dim(3);
  Tensor m = Tensor::zeros({n, c, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      std::copy_n(warped.mask.data().begin() + b * hw, hw, m.data().begin() + (static_cast<std::size_t>(b) * c + ch) * hw);
    }
  }
  return add(warped.image, mul(m, novel_recon));
}

struct MirrorInputs {
  Image image;
  DepthMap depth;
  Pose pose;
};

// Horizontally flipped image and depth with the mirrored camera. Flipping the
// pixel grid mirrors the camera only for a centred principal point, so the
// intrinsics must have cx = 0.5.
inline MirrorInputs mirror_inputs(const Image& image, const DepthMap& depth, const Pose& pose,
                                  const Intrinsics& k = {}) {
  if (k.cx != 0.5) throw std::invalid_argument("mirror_inputs: requires a centred principal point (cx = 0.5)");
  return {flip_last(image), flip_last(depth), mirror_pose(pose)};
}

}  // namespace warpfill
