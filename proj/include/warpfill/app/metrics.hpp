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


// Evaluation metrics and the per-view report.
//
// Every scored view is a triple (prediction, reference, visible mask):
//   * psnr: masked PSNR with peak-to-peak 2 (images in [-1, 1]) over visible
//     pixels; +inf for identical pixels (serialised as the string "inf");
//   * id_similarity: cosine of the identity embeddings, in [-1, 1];
//   * consistency: latent-consistency loss (W+ code distance under the encoder).
// Held-out views (records sharing a subject) compare the synthesis at the
// held-out camera against the held-out image, masked by the warp's visible
// pixels. Single-view subjects are scored by a round trip: the re-warped
// inpainted view at the input camera against the input image.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "warpfill/app/image_io.hpp"
#include "warpfill/losses.hpp"
#include "warpfill/pipeline.hpp"
#include "warpfill/training.hpp"

namespace warpfill {

// Masked PSNR for images in [-1, 1]; `mask` is [N, 1, H, W] with 1 = scored.
inline double psnr(const Image& a, const Image& b, const Tensor& mask = Tensor()) {
  if (a.shape() != b.shape() || a.rank() != 4) throw std::invalid_argument("psnr: image shapes differ");
  const int n = a.dim(0), c = a.dim(1);
  const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  if (mask.defined() && (mask.rank() != 4 || mask.dim(0) != n || mask.dim(1) != 1 || mask.dim(2) != a.dim(2) ||
                         mask.dim(3) != a.dim(3))) {
    throw std::invalid_argument("psnr: mask must be [N,1,H,W]");
  }
  double se = 0.0, count = 0.0;
  for (int s = 0; s < n; ++s) {
    for (std::size_t p = 0; p < hw; ++p) {
      if (mask.defined() && !(mask.data()[s * hw + p] > 0.5)) continue;
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t i = (static_cast<std::size_t>(s) * c + ch) * hw + p;
        se += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        count += 1.0;
      }
    }
  }
  if (count == 0.0) throw std::invalid_argument("psnr: mask selects no pixels");
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(4.0 / (se / count));
}

struct ViewMetrics {
  std::string subject;
  std::string kind;  // "held_out" or "round_trip"
  int source = 0;    // manifest index of the input record
  int target = 0;    // manifest index of the reference record
  double psnr = 0.0;
  double id_similarity = 0.0;
  double consistency = 0.0;
  double visible_fraction = 0.0;
};

struct MetricsReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;  // over finite values
  int infinite_psnr = 0;
  double mean_id_similarity = 0.0;
  double mean_consistency = 0.0;
};

// Scores one (prediction, reference, mask) triple.
inline ViewMetrics score_view(const Image& pred, const Image& ref, const Tensor& visible, const Encoder& encoder,
                              const IdentityEmbedder& embedder) {
  NoGradGuard guard;
  ViewMetrics v;
  v.psnr = psnr(pred, ref, visible);
  v.id_similarity = std::clamp(embedder.similarity(pred, ref).data()[0], -1.0, 1.0);
  v.consistency = loss_consistency(pred, ref, encoder).item();
  double vis = 0.0;
  for (double m : visible.data()) vis += m > 0.5 ? 1.0 : 0.0;
  v.visible_fraction = vis / static_cast<double>(visible.numel());
  return v;
}

inline void finalize_report(MetricsReport& r) {
  double ps = 0.0, id = 0.0, lc = 0.0;
  int finite = 0;
  r.infinite_psnr = 0;
  for (const ViewMetrics& v : r.views) {
    if (std::isinf(v.psnr)) {
      ++r.infinite_psnr;
    } else {
      ps += v.psnr;
      ++finite;
    }
    id += v.id_similarity;
    lc += v.consistency;
  }
  const double n = r.views.empty() ? 1.0 : static_cast<double>(r.views.size());
  r.mean_psnr = finite ? ps / finite : 0.0;
  r.mean_id_similarity = id / n;
  r.mean_consistency = lc / n;
}

struct EvalRecord {
  Image image;
  Pose pose;
  std::string subject;
};

struct EvalOptions {
  PoseSampling round_trip_poses;  // novel cameras for single-view subjects
  std::uint64_t seed = 0;
  std::string save_dir;  // when set, predictions / references / masks are written as PNG
};

inline std::string view_file_stem(std::size_t k) {
  std::ostringstream os;
  os << "view_" << std::setw(4) << std::setfill('0') << k;
  return os.str();
}

// Predictions are quantised to 8 bits before scoring, so the report can be
// recomputed exactly from the saved PNGs.
inline MetricsReport evaluate(const std::vector<EvalRecord>& records, const Models& m, const PipelineConfig& pcfg,
                              const IdentityEmbedder& embedder, const EvalOptions& opt = {}) {
  m.require_all();
  std::map<std::string, std::vector<int>> subjects;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = subjects.try_emplace(records[i].subject);
    if (fresh) order.push_back(records[i].subject);
    it->second.push_back(static_cast<int>(i));
  }
  if (!opt.save_dir.empty()) std::filesystem::create_directories(opt.save_dir);
  Rng rng(opt.seed);
  MetricsReport report;
  auto emit = [&](ViewMetrics v, const Image& pred, const Image& ref, const Tensor& visible) {
    const Image q = quantize_8bit(pred);
    ViewMetrics s = score_view(q, ref, visible, *m.encoder, embedder);
    v.psnr = s.psnr;
    v.id_similarity = s.id_similarity;
    v.consistency = s.consistency;
    v.visible_fraction = s.visible_fraction;
    if (!opt.save_dir.empty()) {
      const std::filesystem::path base = std::filesystem::path(opt.save_dir) / view_file_stem(report.views.size());
      write_png(base.string() + "_pred.png", q);
      write_png(base.string() + "_ref.png", ref);
      write_png(base.string() + "_mask.png", sub(scale(visible, 2.0), Tensor::full(visible.shape(), 1.0)));
    }
    report.views.push_back(v);
  };
  for (const std::string& subject : order) {
    const std::vector<int>& idx = subjects[subject];
    const EvalRecord& src_rec = records[static_cast<std::size_t>(idx[0])];
    const SourceView src = encode_source(m, pcfg, src_rec.image, {src_rec.pose});
    NoGradGuard guard;
    if (idx.size() > 1) {
      for (std::size_t t = 1; t < idx.size(); ++t) {
        const EvalRecord& tgt = records[static_cast<std::size_t>(idx[t])];
        WarpedView trace;
        const Image pred = synthesize_views(m, pcfg, src, {tgt.pose}, &trace);
        ViewMetrics v;
        v.subject = subject;
        v.kind = "held_out";
        v.source = idx[0];
        v.target = idx[t];
        emit(v, pred, tgt.image, sub(Tensor::full(trace.warped.mask.shape(), 1.0), trace.warped.mask));
      }
    } else {
      const Pose novel = sample_novel_pose(rng, opt.round_trip_poses, pcfg);
      const RealStepOutput out = svinet_step_real(m, pcfg, src, {novel});
      ViewMetrics v;
      v.subject = subject;
      v.kind = "round_trip";
      v.source = v.target = idx[0];
      emit(v, out.rewarp, src_rec.image,
           sub(Tensor::full(out.rewarp_view.warped.mask.shape(), 1.0), out.rewarp_view.warped.mask));
    }
  }
  finalize_report(report);
  return report;
}

// Rescores views saved by evaluate() from their PNG files.
inline MetricsReport rescore_saved(const std::string& dir, const std::vector<ViewMetrics>& views, const Encoder& encoder,
                                   const IdentityEmbedder& embedder) {
  MetricsReport r;
  for (std::size_t k = 0; k < views.size(); ++k) {
    const std::string base = (std::filesystem::path(dir) / view_file_stem(k)).string();
    const Image pred = read_png(base + "_pred.png");
    const Image ref = read_png(base + "_ref.png");
    const Image mask_rgb = read_png(base + "_mask.png");
    Tensor mask = Tensor::zeros({1, 1, mask_rgb.dim(2), mask_rgb.dim(3)});
    for (std::size_t p = 0; p < mask.numel(); ++p) mask.data()[p] = mask_rgb.data()[p] > 0.0 ? 1.0 : 0.0;
    ViewMetrics v = views[k];
    const ViewMetrics s = score_view(pred, ref, mask, encoder, embedder);
    v.psnr = s.psnr;
    v.id_similarity = s.id_similarity;
    v.consistency = s.consistency;
    v.visible_fraction = s.visible_fraction;
    r.views.push_back(v);
  }
  finalize_report(r);
  return r;
}

inline nlohmann::ordered_json psnr_json(double v) {
  return std::isinf(v) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(v);
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json summary;
  summary["views"] = r.views.size();
  summary["mean_psnr"] = r.mean_psnr;
  summary["infinite_psnr"] = r.infinite_psnr;
  summary["mean_id_similarity"] = r.mean_id_similarity;
  summary["mean_consistency"] = r.mean_consistency;
  j["schema"] = "warpfill.metrics.v1";
  j["summary"] = summary;
  j["views"] = nlohmann::ordered_json::array();
  for (const ViewMetrics& v : r.views) {
    nlohmann::ordered_json e;
    e["subject"] = v.subject;
    e["kind"] = v.kind;
    e["source"] = v.source;
    e["target"] = v.target;
    e["psnr"] = psnr_json(v.psnr);
    e["id_similarity"] = v.id_similarity;
    e["consistency"] = v.consistency;
    e["visible_fraction"] = v.visible_fraction;
    j["views"].push_back(e);
  }
  return j;
}

inline std::string report_to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "subject,kind,source,target,psnr,id_similarity,consistency,visible_fraction\n";
  for (const ViewMetrics& v : r.views) {
    os << v.subject << ',' << v.kind << ',' << v.source << ',' << v.target << ',';
    if (std::isinf(v.psnr)) {
      os << "inf";
    } else {
      os << v.psnr;
    }
    os << ',' << v.id_similarity << ',' << v.consistency << ',' << v.visible_fraction << '\n';
  }
  return os.str();
}

}  // namespace warpfill
