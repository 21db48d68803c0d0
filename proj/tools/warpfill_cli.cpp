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


// Command-line front end: dataset generation, training, synthesis, editing,
// warping, evaluation and the self-check suite.
//
// Every subcommand honours the global --seed. Options may also come from a
// key=value file given with --config; a [subcommand] section scopes keys to
// one subcommand, and flags on the command line override file values.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "warpfill/app/bundle.hpp"
#include "warpfill/app/checkpoint.hpp"
#include "warpfill/app/image_io.hpp"
#include "warpfill/app/manifest.hpp"
#include "warpfill/app/metrics.hpp"
#include "warpfill/app/selfcheck.hpp"
#include "warpfill/editing.hpp"
#include "warpfill/training.hpp"

namespace fs = std::filesystem;
using namespace warpfill;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool quiet = false;
};

void log(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

struct ModelOptions {
  ModelPaths paths;
  void add(CLI::App* app, bool need_encoder, bool need_svinet) {
    auto* e = app->add_option("--encoder", paths.encoder, "encoder checkpoint")->check(CLI::ExistingFile);
    auto* s = app->add_option("--svinet", paths.svinet, "SVINet checkpoint")->check(CLI::ExistingFile);
    if (need_encoder) e->required();
    if (need_svinet) s->required();
    app->add_option("--generator", paths.generator, "generator checkpoint (default: seeded generator)")
        ->check(CLI::ExistingFile);
    app->add_option("--generator-seed", paths.generator_seed, "seed of the stand-in generator")->capture_default_str();
  }
};

struct PoseRangeOptions {
  PoseSampling sampling;
  void add(CLI::App* app, const std::string& what) {
    app->add_option("--yaw-range", sampling.yaw_range, what + ": yaw ~ U[-r, r] (radians)")->capture_default_str();
    app->add_option("--pitch-range", sampling.pitch_range, what + ": pitch ~ U[-r, r] (radians)")->capture_default_str();
  }
};

// Images with poses from a pose file whose rows name the images.
Dataset load_data_dir(const std::string& dir, int resolution, const Globals& g) {
  const DatasetManifest m = ingest(dir);
  for (const std::string& w : m.warnings) log(g, "warning: " + w);
  if (m.entries.empty()) throw std::runtime_error("dataset '" + dir + "' has no images");
  return load_dataset(m, resolution);
}

Image load_input_image(const std::string& path, const PipelineConfig& pcfg) {
  Image img = read_png(path);
  if (img.dim(2) != pcfg.resolution || img.dim(3) != pcfg.resolution) {
    throw std::runtime_error("image '" + path + "' must be " + std::to_string(pcfg.resolution) + "x" +
                             std::to_string(pcfg.resolution));
  }
  return img;
}

Pose load_pose_checked(const std::string& path, const PipelineConfig& pcfg) {
  const auto [pose, k] = load_pose_file(path);
  if (std::fabs(k.fx - pcfg.K.fx) > 1e-9 || std::fabs(k.fy - pcfg.K.fy) > 1e-9 || std::fabs(k.cx - pcfg.K.cx) > 1e-9 ||
      std::fabs(k.cy - pcfg.K.cy) > 1e-9) {
    throw std::runtime_error("pose '" + path + "': intrinsics differ from the model's camera");
  }
  return pose;
}

// Target cameras from a pose file (rows of 25 floats) or the five default views.
std::vector<Pose> load_targets(const std::string& path, const PipelineConfig& pcfg) {
  if (path.empty()) return default_view_poses(pcfg);
  std::vector<Pose> out;
  for (const PoseRow& r : parse_pose_text(read_text_file(path), false)) out.push_back(pose_from_record(r.record).first);
  if (out.empty()) throw std::runtime_error("target pose file '" + path + "' lists no poses");
  return out;
}

void write_history(const std::string& path, const std::string& header, const std::vector<std::string>& rows) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << header << "\n";
  for (const std::string& r : rows) f << r << "\n";
}

// ---------------------------------------------------------------- make-dataset
struct MakeDatasetOptions {
  std::string out;
  int subjects = 100;
  int views = 1;
  std::uint64_t generator_seed = 1;
  PoseRangeOptions poses{{0.4, 0.2}};
};

int run_make_dataset(const MakeDatasetOptions& o, const Globals& g) {
  const PipelineConfig pcfg;
  const Generator gen(GeneratorConfig{}, o.generator_seed);
  Dataset data;
  std::vector<std::string> subjects;
  if (o.views == 1) {
    data = make_synthetic_dataset(gen, pcfg, o.subjects, g.seed, o.poses.sampling);
    for (int i = 0; i < o.subjects; ++i) subjects.push_back("s" + std::to_string(i));
  } else {
    Rng rng(g.seed);
    NoGradGuard guard;
    for (int s = 0; s < o.subjects; ++s) {
      const LatentCode w = gen.sample_latent(rng);
      for (int v = 0; v < o.views; ++v) {
        const Pose pose = sample_novel_pose(rng, o.poses.sampling, pcfg);
        data.push_back({gen.render(w, {pose}, pcfg.K, pcfg.resolution, pcfg.resolution, pcfg.sampling).image.detach(), pose});
        subjects.push_back("s" + std::to_string(s));
      }
    }
  }
  write_dataset(o.out, data, pcfg.K, subjects);
  log(g, "wrote " + std::to_string(data.size()) + " images to " + o.out);
  return 0;
}

// --------------------------------------------------------------- train-encoder
struct TrainCommon {
  std::string data;
  std::string out;
  std::string resume;
  std::string history;
  int checkpoint_every = 0;
  ModelOptions models;
  TrainConfig cfg;
};

int run_train_encoder(TrainCommon& o, const std::string& optimizer, const Globals& g) {
  const PipelineConfig pcfg;
  o.cfg.seed = g.seed;
  o.cfg.encoder_optimizer = optimizer == "ranger" ? OptimizerKind::kRanger : OptimizerKind::kAdam;
  ModelBundle bundle(o.models.paths, pcfg);
  const Dataset data = load_data_dir(o.data, pcfg.resolution, g);
  EncoderTrainer trainer(bundle.encoder(), bundle.generator(), data, pcfg, o.cfg);
  if (!o.resume.empty()) trainer.restore(load_checkpoint_of_kind(o.resume, "encoder"));
  std::vector<std::string> rows;
  while (trainer.iteration() < o.cfg.encoder_iterations) {
    const double loss = trainer.step();
    std::ostringstream row;
    row << std::setprecision(10) << trainer.iteration() << "," << loss;
    rows.push_back(row.str());
    if (trainer.iteration() % 100 == 0) log(g, "iteration " + std::to_string(trainer.iteration()) + " loss " + row.str().substr(row.str().find(',') + 1));
    if (o.checkpoint_every > 0 && trainer.iteration() % o.checkpoint_every == 0) save_checkpoint(o.out, trainer.checkpoint());
  }
  save_checkpoint(o.out, trainer.checkpoint());
  write_history(o.history, "iteration,loss", rows);
  log(g, "saved " + o.out);
  return 0;
}

// ---------------------------------------------------------------- train-svinet
int run_train_svinet(TrainCommon& o, const PoseSampling& novel, const Globals& g) {
  const PipelineConfig pcfg;
  o.cfg.seed = g.seed;
  o.cfg.novel_poses = novel;
  ModelBundle bundle(o.models.paths, pcfg);
  const Dataset data = load_data_dir(o.data, pcfg.resolution, g);
  Discriminator disc(pcfg.resolution, 5);
  SVINetTrainer trainer(bundle.svinet(), disc, bundle.encoder(), bundle.generator(), data, pcfg, o.cfg);
  if (!o.resume.empty()) trainer.restore(load_checkpoint_of_kind(o.resume, "svinet"));
  std::vector<std::string> rows;
  while (trainer.iteration() < o.cfg.svinet_iterations) {
    const SVINetStepLog l = trainer.step();
    std::ostringstream row;
    row << std::setprecision(10) << trainer.iteration() << "," << l.total << "," << l.rec << "," << l.consistency << ","
        << l.adv << "," << l.disc;
    rows.push_back(row.str());
    if (trainer.iteration() % 50 == 0) log(g, "iteration " + row.str());
    if (o.checkpoint_every > 0 && trainer.iteration() % o.checkpoint_every == 0) save_checkpoint(o.out, trainer.checkpoint());
  }
  save_checkpoint(o.out, trainer.checkpoint());
  write_history(o.history, "iteration,total,rec,consistency,adv,disc", rows);
  log(g, "saved " + o.out);
  return 0;
}

// ------------------------------------------------------------------ synthesize
struct SynthesizeOptions {
  std::string image, pose, targets, out = "grid.png", out_dir, reference, reference_pose;
  ModelOptions models;
};

int run_synthesize(const SynthesizeOptions& o, const Globals& g) {
  const PipelineConfig pcfg;
  ModelBundle bundle(o.models.paths, pcfg);
  const Models m = bundle.models();
  const Image image = load_input_image(o.image, pcfg);
  const Pose pose = load_pose_checked(o.pose, pcfg);
  const std::vector<Pose> targets = load_targets(o.targets, pcfg);
  const SourceView src = encode_source(m, pcfg, image, {pose});
  SourceView ref;
  if (!o.reference.empty()) {
    if (o.reference_pose.empty()) throw std::runtime_error("--reference requires --reference-pose");
    ref = encode_source(m, pcfg, load_input_image(o.reference, pcfg), {load_pose_checked(o.reference_pose, pcfg)});
  }
  NoGradGuard guard;
  std::vector<std::vector<Tensor>> rows = {{image, src.recon}};
  if (!o.reference.empty()) rows[0].push_back(ref.image);
  if (!o.out_dir.empty()) fs::create_directories(o.out_dir);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    WarpedView trace;
    const Image out = o.reference.empty() ? synthesize_views(m, pcfg, src, {targets[k]}, &trace)
                                          : reference_style_synthesize(m, pcfg, src, ref, {targets[k]}, &trace);
    rows.push_back({trace.warped.image, mask_to_image(trace.warped.mask), trace.initial, trace.mirror_initial, out});
    if (!o.out_dir.empty()) {
      std::ostringstream name;
      name << "view_" << k << ".png";
      write_png((fs::path(o.out_dir) / name.str()).string(), out);
    }
  }
  write_png(o.out, make_grid(rows));
  log(g, "wrote " + o.out);
  return 0;
}

// ------------------------------------------------------------------------ edit
struct EditOptions {
  std::string image, pose, direction, targets, out_dir = "edits", save_generator;
  std::vector<double> alphas{1.0};
  ModelOptions models;
  OptConfig opt;
};

int run_edit(EditOptions& o, const Globals& g) {
  const PipelineConfig pcfg;
  o.opt.seed = g.seed;
  ModelBundle bundle(o.models.paths, pcfg);
  Generator& gen = bundle.generator();
  const Image image = load_input_image(o.image, pcfg);
  const Pose pose = load_pose_checked(o.pose, pcfg);
  const std::vector<Pose> targets = load_targets(o.targets, pcfg);
  const GeneratorConfig& gc = gen.config();
  const LatentCode dir = load_direction(o.direction, gc.levels, gc.latent_dim);
  LatentCode w_init;
  if (bundle.has_trained_encoder()) {
    NoGradGuard guard;
    w_init = bundle.encoder().encode(image).detach();
  } else {
    w_init = Tensor::zeros({1, gc.levels, gc.latent_dim});
  }
  const InversionResult inv = invert(image, pose, gen, pcfg, o.opt, w_init, gen.default_noise());
  log(g, "inversion mse " + std::to_string(inv.initial_mse) + " -> " + std::to_string(inv.final_mse));
  std::vector<PseudoView> views;
  if (o.opt.n_pseudo_views > 0) {
    if (!bundle.has_trained_encoder() || !bundle.has_trained_svinet()) {
      throw std::runtime_error("pseudo-views need --encoder and --svinet (or pass --pseudo-views 0)");
    }
    views = multiview_set(image, pose, bundle.models(), pcfg, o.opt);
  }
  const TuningResult tune = pivotal_tune(gen, inv.w, inv.noise, image, pose, views, pcfg, o.opt);
  log(g, "tuning objective " + std::to_string(tune.history.front()) + " -> " +
             std::to_string(*std::min_element(tune.history.begin(), tune.history.end())) + ", input-view loss " +
             std::to_string(tune.initial_input_loss) + " -> " + std::to_string(tune.final_input_loss));
  fs::create_directories(o.out_dir);
  std::vector<std::vector<Tensor>> rows;
  for (std::size_t a = 0; a < o.alphas.size(); ++a) {
    std::vector<Tensor> row;
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const Image out = edit(inv.w, {dir, o.alphas[a]}, targets[k], gen, pcfg, inv.noise);
      std::ostringstream name;
      name << "edit_a" << a << "_v" << k << ".png";
      write_png((fs::path(o.out_dir) / name.str()).string(), out);
      row.push_back(out);
    }
    rows.push_back(row);
  }
  write_png((fs::path(o.out_dir) / "grid.png").string(), make_grid(rows));
  if (!o.save_generator.empty()) save_checkpoint(o.save_generator, generator_checkpoint(gen, o.models.paths.generator_seed));
  log(g, "wrote edits to " + o.out_dir);
  return 0;
}

// ------------------------------------------------------------------------ warp
struct WarpOptions {
  std::string image, depth, src_pose, dst_pose, out = "warped.png", mask_out, depth_out;
  double beta = 0.0;
  bool beta_set = false;
};

int run_warp(const WarpOptions& o, const Globals& g) {
  const Image image = read_png(o.image);
  const DepthMap depth = read_pfm(o.depth);
  if (depth.dim(2) != image.dim(2) || depth.dim(3) != image.dim(3)) {
    throw std::runtime_error("depth '" + o.depth + "' does not match the image size");
  }
  const auto [src, k_src] = load_pose_file(o.src_pose);
  const auto [dst, k_dst] = load_pose_file(o.dst_pose);
  if (std::fabs(k_src.fx - k_dst.fx) > 1e-12 || std::fabs(k_src.fy - k_dst.fy) > 1e-12 ||
      std::fabs(k_src.cx - k_dst.cx) > 1e-12 || std::fabs(k_src.cy - k_dst.cy) > 1e-12) {
    throw std::runtime_error("source and target poses must share intrinsics");
  }
  WarpConfig wc = WarpConfig::for_sampling(SamplingConfig{});
  if (o.beta_set) wc.beta = o.beta;
  const WarpResult r = forward_warp(image, depth, relative_pose(src, dst), k_src, wc);
  write_png(o.out, r.image);
  if (!o.mask_out.empty()) write_png(o.mask_out, mask_to_image(r.mask));
  if (!o.depth_out.empty()) write_pfm(o.depth_out, r.depth);
  log(g, "wrote " + o.out);
  return 0;
}

// ------------------------------------------------------------------------ eval
struct EvalOptionsCli {
  std::string data, out = "report.json", csv, save_dir;
  ModelOptions models;
  PoseRangeOptions poses{{0.4, 0.2}};
};

int run_eval(const EvalOptionsCli& o, const Globals& g) {
  const PipelineConfig pcfg;
  ModelBundle bundle(o.models.paths, pcfg);
  const DatasetManifest man = ingest(o.data);
  for (const std::string& w : man.warnings) log(g, "warning: " + w);
  const Dataset data = load_dataset(man, pcfg.resolution);
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < data.size(); ++i) {
    records.push_back({data[i].image, data[i].pose, man.entries[i].subject.empty() ? "r" + std::to_string(i) : man.entries[i].subject});
  }
  EvalOptions eo;
  eo.round_trip_poses = o.poses.sampling;
  eo.seed = g.seed;
  eo.save_dir = o.save_dir;
  const RandomConvIdentity embedder;
  const MetricsReport report = evaluate(records, bundle.models(), pcfg, embedder, eo);
  std::ofstream f(o.out);
  if (!f) throw std::runtime_error("cannot write '" + o.out + "'");
  f << report_to_json(report).dump(2) << "\n";
  if (!o.csv.empty()) {
    std::ofstream c(o.csv);
    if (!c) throw std::runtime_error("cannot write '" + o.csv + "'");
    c << report_to_csv(report);
  }
  std::printf("views %zu  mean PSNR %.3f dB (%d identical)  mean ID %.4f  mean consistency %.6f\n", report.views.size(),
              report.mean_psnr, report.infinite_psnr, report.mean_id_similarity, report.mean_consistency);
  return 0;
}

// ------------------------------------------------------------------- selfcheck
int run_selfcheck_cmd(double eps) {
  SelfCheckOptions opt;
  opt.demod_eps = eps;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CheckResult> results = run_selfcheck(opt);
  print_check_table(stdout, results);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok = all_passed(results);
  std::printf("selfcheck: %s (%zu checks, %.1f s)\n", ok ? "PASS" : "FAIL", results.size(), secs);
  return ok ? 0 : 1;
}

void add_loss_weight_options(CLI::App* app, LossWeights& w, bool encoder) {
  if (encoder) {
    app->add_option("--lambda-mse", w.lambda_mse, "encoder MSE weight")->capture_default_str();
    app->add_option("--lambda-lpips", w.lambda_lpips, "encoder perceptual weight")->capture_default_str();
    app->add_option("--lambda-id-wplus", w.lambda_id_wplus, "encoder identity weight")->capture_default_str();
    return;
  }
  app->add_option("--lambda-l1", w.lambda_l1, "reconstruction MAE weight")->capture_default_str();
  app->add_option("--lambda-p", w.lambda_p, "reconstruction perceptual weight")->capture_default_str();
  app->add_option("--lambda-id", w.lambda_id, "reconstruction identity weight")->capture_default_str();
  app->add_option("--lambda-rec", w.lambda_rec, "total: reconstruction weight")->capture_default_str();
  app->add_option("--lambda-c", w.lambda_c, "total: latent-consistency weight")->capture_default_str();
  app->add_option("--lambda-adv", w.lambda_adv, "total: adversarial weight")->capture_default_str();
  app->add_option("--gamma", w.gamma, "discriminator gradient-penalty weight")->capture_default_str();
  app->add_flag("--squared-r1", w.squared_r1, "penalise the squared gradient norm");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"warpfill: warp-and-inpaint novel view synthesis for a toy 3D GAN"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "global random seed")->capture_default_str();
  app.add_flag("-q,--quiet", g.quiet, "suppress progress messages");
  app.set_config("--config", "", "key=value configuration file ([subcommand] sections allowed)");

  MakeDatasetOptions md;
  auto* c_md = app.add_subcommand("make-dataset", "render a synthetic image collection with poses.txt");
  c_md->add_option("--out", md.out, "output directory")->required();
  c_md->add_option("--subjects", md.subjects, "number of latent codes")->capture_default_str()->check(CLI::PositiveNumber);
  c_md->add_option("--views", md.views, "images per latent code")->capture_default_str()->check(CLI::PositiveNumber);
  c_md->add_option("--generator-seed", md.generator_seed, "seed of the stand-in generator")->capture_default_str();
  md.poses.add(c_md, "camera sampling");

  TrainCommon te;
  te.out = "encoder.ckpt";
  std::string optimizer = "adam";
  auto* c_te = app.add_subcommand("train-encoder", "train the W+ encoder");
  c_te->add_option("--data", te.data, "dataset directory (images + poses.txt)")->required()->check(CLI::ExistingDirectory);
  c_te->add_option("--out", te.out, "checkpoint path")->capture_default_str();
  c_te->add_option("--iterations", te.cfg.encoder_iterations, "training iterations")->capture_default_str();
  c_te->add_option("--batch-size", te.cfg.batch_size, "images per step")->capture_default_str();
  c_te->add_option("--lr", te.cfg.lr_encoder, "learning rate")->capture_default_str();
  c_te->add_option("--optimizer", optimizer, "adam or ranger")->check(CLI::IsMember({"adam", "ranger"}))->capture_default_str();
  c_te->add_option("--checkpoint-every", te.checkpoint_every, "save every N iterations (0: only at the end)");
  c_te->add_option("--resume", te.resume, "resume from an encoder checkpoint")->check(CLI::ExistingFile);
  c_te->add_option("--history", te.history, "loss history CSV");
  c_te->add_option("--generator", te.models.paths.generator, "generator checkpoint")->check(CLI::ExistingFile);
  c_te->add_option("--generator-seed", te.models.paths.generator_seed, "seed of the stand-in generator")->capture_default_str();
  add_loss_weight_options(c_te, te.cfg.weights, true);

  TrainCommon ts;
  ts.out = "svinet.ckpt";
  PoseRangeOptions ts_poses;
  bool no_mod = false, no_sym = false, no_cons = false, no_synth = false;
  auto* c_ts = app.add_subcommand("train-svinet", "train the inpainting network");
  c_ts->add_option("--data", ts.data, "dataset directory (images + poses.txt)")->required()->check(CLI::ExistingDirectory);
  c_ts->add_option("--encoder", ts.models.paths.encoder, "trained encoder checkpoint")->required()->check(CLI::ExistingFile);
  c_ts->add_option("--generator", ts.models.paths.generator, "generator checkpoint")->check(CLI::ExistingFile);
  c_ts->add_option("--generator-seed", ts.models.paths.generator_seed, "seed of the stand-in generator")->capture_default_str();
  c_ts->add_option("--out", ts.out, "checkpoint path")->capture_default_str();
  c_ts->add_option("--iterations", ts.cfg.svinet_iterations, "training iterations")->capture_default_str();
  c_ts->add_option("--lr", ts.cfg.lr_svinet, "learning rate")->capture_default_str();
  c_ts->add_option("--lr-d", ts.cfg.lr_discriminator, "discriminator learning rate")->capture_default_str();
  c_ts->add_option("--warmup", ts.cfg.warmup_iterations, "linear learning-rate warmup iterations")->capture_default_str();
  c_ts->add_option("--synth-pool", ts.cfg.synth_pool, "number of cached synthetic pairs")->capture_default_str();
  c_ts->add_option("--penalty-step", ts.cfg.penalty_step, "finite-difference step of the gradient-norm estimate")
      ->capture_default_str();
  c_ts->add_option("--checkpoint-every", ts.checkpoint_every, "save every N iterations (0: only at the end)");
  c_ts->add_option("--resume", ts.resume, "resume from an SVINet checkpoint")->check(CLI::ExistingFile);
  c_ts->add_option("--history", ts.history, "loss history CSV");
  c_ts->add_flag("--no-modulation", no_mod, "ablation: replace the W+ modulation by identity");
  c_ts->add_flag("--no-symmetry", no_sym, "ablation: feed a zero image to the mirror branch");
  c_ts->add_flag("--no-consistency", no_cons, "ablation: drop the latent-consistency term");
  c_ts->add_flag("--no-synth", no_synth, "ablation: train on real images only");
  ts_poses.add(c_ts, "novel camera sampling");
  add_loss_weight_options(c_ts, ts.cfg.weights, false);

  SynthesizeOptions sy;
  auto* c_sy = app.add_subcommand("synthesize", "render novel views of one image as a grid");
  c_sy->add_option("--image", sy.image, "input PNG")->required()->check(CLI::ExistingFile);
  c_sy->add_option("--pose", sy.pose, "input pose file")->required()->check(CLI::ExistingFile);
  c_sy->add_option("--targets", sy.targets, "target pose file (default: front, right, left, top, down)")
      ->check(CLI::ExistingFile);
  c_sy->add_option("--out", sy.out, "grid PNG")->capture_default_str();
  c_sy->add_option("--out-dir", sy.out_dir, "also write each view as a PNG here");
  c_sy->add_option("--reference", sy.reference, "reference image for style synthesis")->check(CLI::ExistingFile);
  c_sy->add_option("--reference-pose", sy.reference_pose, "pose file of the reference image")->check(CLI::ExistingFile);
  sy.models.add(c_sy, true, true);

  EditOptions ed;
  auto* c_ed = app.add_subcommand("edit", "invert, tune and edit one image along a latent direction");
  c_ed->add_option("--image", ed.image, "input PNG")->required()->check(CLI::ExistingFile);
  c_ed->add_option("--pose", ed.pose, "input pose file")->required()->check(CLI::ExistingFile);
  c_ed->add_option("--direction", ed.direction, "direction file (L rows of d numbers)")->required()->check(CLI::ExistingFile);
  c_ed->add_option("--alpha", ed.alphas, "edit strengths")->capture_default_str();
  c_ed->add_option("--targets", ed.targets, "target pose file (default: five views)")->check(CLI::ExistingFile);
  c_ed->add_option("--out-dir", ed.out_dir, "output directory")->capture_default_str();
  c_ed->add_option("--inversion-steps", ed.opt.inversion_steps, "latent + noise optimisation steps")->capture_default_str();
  c_ed->add_option("--tuning-steps", ed.opt.tuning_steps, "generator tuning steps")->capture_default_str();
  c_ed->add_option("--pseudo-views", ed.opt.n_pseudo_views, "synthesised views used while tuning")->capture_default_str();
  c_ed->add_option("--lambda-n", ed.opt.lambda_n, "noise regulariser weight")->capture_default_str();
  c_ed->add_option("--lambda-mv", ed.opt.lambda_mv, "pseudo-view weight")->capture_default_str();
  c_ed->add_option("--lambda2-g", ed.opt.lambda2_g, "tuning MSE weight")->capture_default_str();
  c_ed->add_option("--lambda-lpips-g", ed.opt.lambda_lpips_g, "tuning perceptual weight")->capture_default_str();
  c_ed->add_option("--lr-latent", ed.opt.lr_latent, "inversion learning rate")->capture_default_str();
  c_ed->add_option("--lr-generator", ed.opt.lr_generator, "tuning learning rate")->capture_default_str();
  c_ed->add_option("--save-generator", ed.save_generator, "write the tuned generator checkpoint here");
  ed.models.add(c_ed, false, false);

  WarpOptions wp;
  auto* c_wp = app.add_subcommand("warp", "forward-warp an image with its depth to another camera");
  c_wp->add_option("--image", wp.image, "input PNG")->required()->check(CLI::ExistingFile);
  c_wp->add_option("--depth", wp.depth, "ray-distance depth (single-channel PFM)")->required()->check(CLI::ExistingFile);
  c_wp->add_option("--src-pose", wp.src_pose, "source pose file")->required()->check(CLI::ExistingFile);
  c_wp->add_option("--dst-pose", wp.dst_pose, "target pose file")->required()->check(CLI::ExistingFile);
  c_wp->add_option("--out", wp.out, "warped PNG")->capture_default_str();
  c_wp->add_option("--mask-out", wp.mask_out, "hole mask PNG (white = hole)");
  c_wp->add_option("--depth-out", wp.depth_out, "splatted depth PFM");
  auto* beta_opt = c_wp->add_option("--beta", wp.beta, "softmax-splatting sharpness (default: from the sampling range)");

  EvalOptionsCli ev;
  auto* c_ev = app.add_subcommand("eval", "score synthesis on a dataset");
  c_ev->add_option("--data", ev.data, "dataset directory (images + poses.txt)")->required()->check(CLI::ExistingDirectory);
  c_ev->add_option("--out", ev.out, "JSON report")->capture_default_str();
  c_ev->add_option("--csv", ev.csv, "per-view CSV");
  c_ev->add_option("--save-dir", ev.save_dir, "write scored predictions, references and masks here");
  ev.models.add(c_ev, true, true);
  ev.poses.add(c_ev, "round-trip camera sampling");

  double corrupt_eps = 1e-8;
  auto* c_sc = app.add_subcommand("selfcheck", "run the invariant and oracle suite");
  c_sc->add_option("--corrupt-eps", corrupt_eps, "override the demodulation epsilon (negative control)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_md) return run_make_dataset(md, g);
    if (*c_te) return run_train_encoder(te, optimizer, g);
    if (*c_ts) {
      ts.cfg.use_modulation = !no_mod;
      ts.cfg.use_symmetry = !no_sym;
      ts.cfg.use_consistency_loss = !no_cons;
      ts.cfg.use_synth_data = !no_synth;
      return run_train_svinet(ts, ts_poses.sampling, g);
    }
    if (*c_sy) return run_synthesize(sy, g);
    if (*c_ed) return run_edit(ed, g);
    if (*c_wp) {
      wp.beta_set = beta_opt->count() > 0;
      return run_warp(wp, g);
    }
    if (*c_ev) return run_eval(ev, g);
    if (*c_sc) return run_selfcheck_cmd(corrupt_eps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
