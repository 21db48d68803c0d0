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


// The warp-and-inpaint view synthesis flow shared by training, editing and
// the command-line tools.
//
// Forward flow (source view c -> novel view c'):
//   w+ = E(I); render (I_rec, D) at c and (I_rec', D') at c';
//   warp I to c' with D; fill holes with I_rec'; warp the mirrored input from
//   the mirrored camera to c' and fill likewise; inpaint with SVINet under w+.
// Reverse flow (re-warp, c' -> c):
//   re-warp the warped novel image back to c with its splatted depth (D' in
//   holes); fill holes with I_rec; mirror branch from the warped novel image
//   (holes excluded); inpaint.

#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "warpfill/encoder.hpp"
#include "warpfill/generator.hpp"
#include "warpfill/geometry.hpp"
#include "warpfill/svinet.hpp"
#include "warpfill/warping.hpp"

namespace warpfill {

struct PipelineConfig {
  int resolution = 64;
  Intrinsics K;
  SamplingConfig sampling;
  WarpConfig warp = WarpConfig::for_sampling(SamplingConfig{});
  double camera_radius = 2.7;

  void validate() const {
    if (resolution < 8) throw std::invalid_argument("PipelineConfig: resolution must be >= 8");
    K.validate();
    sampling.validate();
    if (!(camera_radius > sampling.near)) throw std::invalid_argument("PipelineConfig: camera inside the near plane");
  }
  Pose orbit(double yaw, double pitch) const { return orbit_pose(yaw, pitch, camera_radius); }
};

// Inpainting function (initial, mirror_initial, w+) -> image. Defaults to SVINet.
using Inpainter = std::function<Image(const Image&, const Image&, const LatentCode&)>;

struct Models {
  const Generator* generator = nullptr;
  const Encoder* encoder = nullptr;
  const SVINet* svinet = nullptr;
  Inpainter inpainter;  // overrides svinet when set

  Image inpaint(const Image& initial, const Image& mirror_initial, const LatentCode& w) const {
    if (inpainter) return inpainter(initial, mirror_initial, w);
    if (!svinet) throw std::invalid_argument("Models: no inpainting network");
    return svinet->inpaint(initial, mirror_initial, w);
  }
  void require_all() const {
    if (!generator || !encoder) throw std::invalid_argument("Models: generator and encoder are required");
  }
};

// A source view: image, its camera, its W+ code, and the reconstruction and
// depth rendered from that code at the source camera.
struct SourceView {
  Image image;
  std::vector<Pose> poses;
  LatentCode w;
  Image recon;
  DepthMap depth;
};

// Everything produced before inpainting when moving to new cameras.
struct WarpedView {
  std::vector<Pose> poses;
  Image recon;       // render of the fill code at the new cameras
  DepthMap depth;    // rendered depth at the new cameras
  WarpResult warped;
  WarpResult mirror_warped;
  Image initial;
  Image mirror_initial;
};

namespace detail {

inline std::vector<RelativePose> relative_poses(const std::vector<Pose>& src, const std::vector<Pose>& dst) {
  if (src.size() != dst.size()) throw std::invalid_argument("pipeline: pose batch sizes differ");
  std::vector<RelativePose> out;
  for (std::size_t i = 0; i < src.size(); ++i) out.push_back(relative_pose(src[i], dst[i]));
  return out;
}

inline std::vector<Pose> mirrored(const std::vector<Pose>& poses) {
  std::vector<Pose> out;
  for (const Pose& p : poses) out.push_back(mirror_pose(p));
  return out;
}

// Warps the horizontally mirrored source (from the mirrored cameras) to `dst`
// and fills its holes with `fill`.
inline WarpResult mirror_warp(const Image& image, const DepthMap& depth, const std::vector<Pose>& src,
                              const std::vector<Pose>& dst, const PipelineConfig& cfg, const Tensor& source_valid) {
  if (cfg.K.cx != 0.5) throw std::invalid_argument("pipeline: the mirror branch requires cx = 0.5");
  return forward_warp(flip_last(image), flip_last(depth), relative_poses(mirrored(src), dst), cfg.K, cfg.warp,
                      source_valid.defined() ? flip_last(source_valid) : Tensor());
}

}  // namespace detail

// E(I) and the renders at the source cameras. No gradients flow.
inline SourceView encode_source(const Models& m, const PipelineConfig& cfg, const Image& image,
                                const std::vector<Pose>& poses, const LatentCode& w_override = Tensor()) {
  m.require_all();
  NoGradGuard guard;
  SourceView s;
  s.image = image.detach();
  s.poses = poses;
  s.w = w_override.defined() ? w_override.detach() : m.encoder->encode(image).detach();
  const RenderOutput r = m.generator->render(s.w, poses, cfg.K, cfg.resolution, cfg.resolution, cfg.sampling);
  s.recon = r.image.detach();
  s.depth = r.depth.detach();
  return s;
}

// Forward-flow preparation. `source_depth` replaces the rendered source depth
// when defined (synthetic pairs carry their ground-truth depth); `fill_code`
// replaces the source code for the hole-filling render when defined.
inline WarpedView prepare_novel_view(const Models& m, const PipelineConfig& cfg, const SourceView& src,
                                     const std::vector<Pose>& novel, const DepthMap& source_depth = Tensor(),
                                     const LatentCode& fill_code = Tensor()) {
  m.require_all();
  NoGradGuard guard;
  const DepthMap& depth = source_depth.defined() ? source_depth : src.depth;
  WarpedView v;
  v.poses = novel;
  const RenderOutput r = m.generator->render(fill_code.defined() ? fill_code : src.w, novel, cfg.K, cfg.resolution,
                                             cfg.resolution, cfg.sampling);
  v.recon = r.image.detach();
  v.depth = r.depth.detach();
  v.warped = forward_warp(src.image, depth, detail::relative_poses(src.poses, novel), cfg.K, cfg.warp);
  v.initial = initial_fill(v.warped, v.recon);
  v.mirror_warped = detail::mirror_warp(src.image, depth, src.poses, novel, cfg, Tensor());
  v.mirror_initial = initial_fill(v.mirror_warped, v.recon);
  return v;
}

// Reverse-flow preparation: back from the novel cameras to the source cameras.
inline WarpedView prepare_rewarp(const PipelineConfig& cfg, const SourceView& src, const WarpedView& novel) {
  NoGradGuard guard;
  const std::vector<RelativePose> back = detail::relative_poses(novel.poses, src.poses);
  WarpedView v;
  v.poses = src.poses;
  v.recon = src.recon;
  v.depth = src.depth;
  v.warped = rewarp(novel.warped, novel.depth, back, cfg.K, cfg.warp);
  v.initial = initial_fill(v.warped, src.recon);
  Tensor depth = Tensor::zeros(novel.depth.shape());
  Tensor valid = Tensor::zeros(novel.depth.shape());
  for (std::size_t i = 0; i < depth.numel(); ++i) {
    const bool hole = novel.warped.mask.data()[i] > 0.5;
    depth.data()[i] = hole ? novel.depth.data()[i] : novel.warped.depth.data()[i];
    valid.data()[i] = hole ? 0.0 : 1.0;
  }
  v.mirror_warped = detail::mirror_warp(novel.warped.image, depth, novel.poses, src.poses, cfg, valid);
  v.mirror_initial = initial_fill(v.mirror_warped, src.recon);
  return v;
}

// Full forward flow to the given cameras; `style` (default: the source code)
// modulates the inpainting network.
inline Image synthesize_views(const Models& m, const PipelineConfig& cfg, const SourceView& src,
                              const std::vector<Pose>& novel, WarpedView* trace = nullptr) {
  WarpedView v = prepare_novel_view(m, cfg, src, novel);
  Image out = m.inpaint(v.initial, v.mirror_initial, src.w);
  if (trace) *trace = std::move(v);
  return out;
}

// Reference-based style synthesis: the source is warped as usual, while the
// reference code drives the hole-filling render and the inpainting modulation.
inline Image reference_style_synthesize(const Models& m, const PipelineConfig& cfg, const SourceView& src,
                                        const SourceView& reference, const std::vector<Pose>& novel,
                                        WarpedView* trace = nullptr) {
  WarpedView v = prepare_novel_view(m, cfg, src, novel, Tensor(), reference.w);
  Image out = m.inpaint(v.initial, v.mirror_initial, reference.w);
  if (trace) *trace = std::move(v);
  return out;
}

// The five presentation views: front, right, left, top, down.
inline std::vector<Pose> default_view_poses(const PipelineConfig& cfg, double yaw = 0.45, double pitch = 0.25) {
  return {cfg.orbit(0.0, 0.0), cfg.orbit(yaw, 0.0), cfg.orbit(-yaw, 0.0), cfg.orbit(0.0, pitch), cfg.orbit(0.0, -pitch)};
}

}  // namespace warpfill
