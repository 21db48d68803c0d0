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
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "warpfill/app/bundle.hpp"
#include "warpfill/app/checkpoint.hpp"
#include "warpfill/app/image_io.hpp"
#include "warpfill/app/manifest.hpp"
#include "warpfill/app/metrics.hpp"
#include "warpfill/app/selfcheck.hpp"
#include "warpfill/training.hpp"

namespace warpfill {
namespace {

namespace fs = std::filesystem;

// Fresh per-test scratch directory under the system temp dir.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / ("warpfill_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

Tensor random_unit(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(s);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// ---- Pixel conversion and PNG -------------------------------------------------

TEST(PixelConversion, EndpointsAndRoundHalfEven) {
  EXPECT_EQ(byte_to_unit(0), -1.0);
  EXPECT_EQ(byte_to_unit(255), 1.0);
  EXPECT_EQ(unit_to_byte(-1.0), 0);
  EXPECT_EQ(unit_to_byte(1.0), 255);
  EXPECT_EQ(unit_to_byte(0.0), 128);                          // 127.5 -> 128
  EXPECT_EQ(unit_to_byte(126.5 / 127.5 - 1.0), 126);          // 126.5 -> 126
  EXPECT_EQ(unit_to_byte(128.5 / 127.5 - 1.0), 128);          // 128.5 -> 128
  EXPECT_EQ(unit_to_byte(254.5 / 127.5 - 1.0), 254);          // 254.5 -> 254
  EXPECT_EQ(unit_to_byte(-3.0), 0);
  EXPECT_EQ(unit_to_byte(7.0), 255);
  EXPECT_THROW(unit_to_byte(std::nan("")), std::invalid_argument);
  for (int b = 0; b < 256; ++b) EXPECT_EQ(unit_to_byte(byte_to_unit(static_cast<std::uint8_t>(b))), b);
}

TEST(Png, RoundTripOfQuantizedImageIsExact) {
  TempDir tmp;
  const Tensor img = quantize_8bit(random_unit({1, 3, 9, 13}, 1));
  write_png(tmp.file("a.png"), img);
  const Tensor back = read_png(tmp.file("a.png"));
  EXPECT_EQ(back.shape(), img.shape());
  EXPECT_EQ(back.data(), img.data());
}

TEST(Png, WritesSelectedBatchElementAndSingleChannel) {
  TempDir tmp;
  const Tensor batch = quantize_8bit(random_unit({2, 3, 4, 4}, 2));
  write_png(tmp.file("b.png"), batch, 1);
  EXPECT_EQ(read_png(tmp.file("b.png")).data(), slice(batch, 0, 1, 1).data());
  const Tensor gray = quantize_8bit(random_unit({1, 1, 4, 5}, 3));
  write_png(tmp.file("g.png"), gray);
  const Tensor g = read_png(tmp.file("g.png"));
  ASSERT_EQ(g.shape(), (Shape{1, 3, 4, 5}));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(slice(g, 1, c, 1).data(), gray.data());
}

TEST(Png, ErrorsAreReported) {
  TempDir tmp;
  EXPECT_THROW(read_png(tmp.file("missing.png")), std::runtime_error);
  write_text(tmp.file("junk.png"), "not a png");
  EXPECT_THROW(read_png(tmp.file("junk.png")), std::runtime_error);
  EXPECT_THROW(write_png(tmp.file("x.png"), Tensor::zeros({1, 2, 4, 4})), std::invalid_argument);
}

TEST(Pfm, RoundTripIsBitExactInFloat32) {
  TempDir tmp;
  Tensor d = Tensor::zeros({1, 1, 5, 7});
  for (std::size_t i = 0; i < d.numel(); ++i) d.data()[i] = static_cast<float>(1.5 + 0.01 * static_cast<double>(i));
  write_pfm(tmp.file("d.pfm"), d);
  const Tensor back = read_pfm(tmp.file("d.pfm"));
  EXPECT_EQ(back.shape(), d.shape());
  EXPECT_EQ(back.data(), d.data());
  // Rows are stored bottom-to-top.
  const std::string bytes = slurp(tmp.file("d.pfm"));
  float first;
  std::memcpy(&first, bytes.data() + bytes.size() - 5 * 7 * 4, 4);
  EXPECT_EQ(first, static_cast<float>(d.data()[4 * 7]));
}

TEST(Pfm, RejectsBigEndianAndColor) {
  TempDir tmp;
  write_text(tmp.file("be.pfm"), "Pf\n1 1\n1.0\n\0\0\0\0");
  EXPECT_THROW(read_pfm(tmp.file("be.pfm")), std::runtime_error);
  write_text(tmp.file("c.pfm"), "PF\n1 1\n-1.0\n");
  EXPECT_THROW(read_pfm(tmp.file("c.pfm")), std::runtime_error);
}

TEST(Grid, LayoutAndBackground) {
  const Tensor a = Tensor::full({1, 3, 4, 4}, 0.5);
  const Tensor b = mask_to_image(Tensor::full({1, 1, 4, 4}, 1.0));
  EXPECT_EQ(b.data(), Tensor::full({1, 3, 4, 4}, 1.0).data());
  const Tensor g = make_grid({{a, b}, {a}}, 2);
  EXPECT_EQ(g.shape(), (Shape{1, 3, 2 * 4 + 3 * 2, 2 * 4 + 3 * 2}));
  EXPECT_EQ(g.data()[0], -1.0);
  EXPECT_EQ(g.data()[2 * 14 + 2], 0.5);
  EXPECT_EQ(g.data()[2 * 14 + 8], 1.0);
  EXPECT_EQ(g.data()[8 * 14 + 8], -1.0);  // missing cell
  EXPECT_THROW(make_grid({{a, Tensor::full({1, 1, 4, 4}, 1.0)}}), std::invalid_argument);
}

// ---- Poses and manifests ------------------------------------------------------

std::string pose_line(const std::string& path, const Pose& p, const Intrinsics& k, int drop = 0) {
  PoseRow r;
  r.image = path;
  r.record = pose_to_record(p, k);
  std::string s = format_pose_row(r);
  for (int i = 0; i < drop; ++i) s = s.substr(0, s.rfind(' '));
  return s;
}

TEST(PoseRecord, TwentyFiveFloatRowRoundTrips) {
  const Pose p = orbit_pose(0.3, -0.1, 2.7);
  const Intrinsics k{2.1, 1.9, 0.5, 0.45};
  PoseRow r;
  r.record = pose_to_record(p, k);
  const PoseRow back = parse_pose_row(format_pose_row(r), 1, false);
  EXPECT_EQ(back.record, r.record);
  const auto [p2, k2] = pose_from_record(back.record);
  EXPECT_EQ(p2.matrix(), p.matrix());
  EXPECT_EQ(k2.fx, 2.1);
  EXPECT_EQ(k2.cy, 0.45);
}

TEST(PoseRecord, MalformedRowsNameTheRow) {
  const Pose p = orbit_pose(0.1, 0.0, 2.7);
  const std::string text = "# header\n" + pose_line("a.png", p, {}) + "\n\n" + pose_line("b.png", p, {}, 1) + "\n";
  try {
    parse_pose_text(text, true);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("pose row 4"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("expected 25 floats, got 24"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_pose_row(pose_line("", p, {}) + " 1.0", 2, false), ParseError);
  EXPECT_THROW(parse_pose_row(pose_line("", p, {}) + " train s0 extra", 2, false), ParseError);
  std::string nan_row = pose_line("", p, {});
  nan_row.replace(0, nan_row.find(' '), "nan");
  EXPECT_THROW(parse_pose_row(nan_row, 3, false), ParseError);
  PoseRow bad;
  bad.record = pose_to_record(p, {});
  bad.record[0] = 2.0;  // not a rotation
  EXPECT_THROW(parse_pose_row(format_pose_row(bad), 5, false), ParseError);
}

TEST(PoseFile, SaveLoadRoundTripWithOrWithoutPath) {
  TempDir tmp;
  const Pose p = orbit_pose(-0.2, 0.15, 2.7);
  save_pose_file(tmp.file("p.txt"), p, Intrinsics{});
  EXPECT_EQ(load_pose_file(tmp.file("p.txt")).first.matrix(), p.matrix());
  write_text(tmp.file("q.txt"), pose_line("img.png", p, {}) + " train s1\n");
  EXPECT_EQ(load_pose_file(tmp.file("q.txt")).first.matrix(), p.matrix());
  write_text(tmp.file("two.txt"), pose_line("", p, {}) + "\n" + pose_line("", p, {}) + "\n");
  EXPECT_THROW(load_pose_file(tmp.file("two.txt")), ParseError);
}

TEST(Manifest, EmptyDirectoryGivesEmptyManifestAndWarning) {
  TempDir tmp;
  const DatasetManifest m = ingest(tmp.path().string());
  EXPECT_TRUE(m.entries.empty());
  ASSERT_EQ(m.warnings.size(), 1u);
  EXPECT_NE(m.warnings[0].find("empty"), std::string::npos);
}

TEST(Manifest, WriteIngestLoadRoundTrip) {
  TempDir tmp;
  const Generator gen(detail::small_generator_config(), 1);
  PipelineConfig pcfg;
  pcfg.resolution = 16;
  const Dataset data = make_synthetic_dataset(gen, pcfg, 3, 4);
  write_dataset(tmp.path().string(), data, pcfg.K, {"alice", "alice", "bob"});
  const DatasetManifest m = ingest(tmp.path().string());
  ASSERT_EQ(m.entries.size(), 3u);
  EXPECT_TRUE(m.warnings.empty());
  EXPECT_EQ(m.entries[1].subject, "alice");
  EXPECT_EQ(m.entries[2].subject, "bob");
  EXPECT_EQ(m.entries[0].split, "train");
  const Dataset back = load_dataset(m, 16);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].pose.matrix(), data[i].pose.matrix());
    EXPECT_EQ(back[i].image.data(), quantize_8bit(data[i].image).data());
  }
  EXPECT_THROW(load_dataset(m, 32), std::runtime_error);
}

TEST(Manifest, MissingFilesAndBadRowsAreErrors) {
  TempDir tmp;
  const Pose p = orbit_pose(0.0, 0.0, 2.7);
  write_text(tmp.file("poses.txt"), pose_line("nope.png", p, {}) + "\n");
  EXPECT_THROW(ingest(tmp.path().string()), std::runtime_error);
  write_png(tmp.file("x.png"), Tensor::zeros({1, 3, 4, 4}));
  write_text(tmp.file("poses.txt"), pose_line("x.png", p, {}, 3) + "\n");
  EXPECT_THROW(ingest(tmp.path().string()), ParseError);
  fs::remove(tmp.file("poses.txt"));
  EXPECT_THROW(ingest(tmp.path().string()), std::runtime_error);  // non-empty dir without poses
  EXPECT_THROW(ingest(tmp.file("not_a_dir")), std::runtime_error);
}

// ---- Metrics ------------------------------------------------------------------

TEST(Metrics, PsnrSentinelAndHandCase) {
  const Tensor a = random_unit({1, 3, 8, 8}, 5);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  // Constant error of 0.2 over a peak-to-peak range of 2: 10 log10(4 / 0.04) = 20 dB.
  EXPECT_NEAR(psnr(a, add_scalar(a, 0.2)), 20.0, 1e-9);
  Tensor mask = Tensor::zeros({1, 1, 8, 8});
  mask.data()[3] = 1.0;
  Tensor b = a.clone();
  b.data()[10] += 0.5;  // outside the mask
  EXPECT_TRUE(std::isinf(psnr(a, b, mask)));
  EXPECT_THROW(psnr(a, b, Tensor::zeros({1, 1, 8, 8})), std::invalid_argument);
}

TEST(Metrics, IdenticalInputsScorePerfectly) {
  const Encoder enc(detail::small_encoder_config(), 1);
  const RandomConvIdentity emb;
  const Tensor a = random_unit({1, 3, 16, 16}, 6);
  const ViewMetrics v = score_view(a, a, Tensor::full({1, 1, 16, 16}, 1.0), enc, emb);
  EXPECT_TRUE(std::isinf(v.psnr));
  EXPECT_NEAR(v.id_similarity, 1.0, 1e-12);
  EXPECT_EQ(v.consistency, 0.0);
  EXPECT_EQ(v.visible_fraction, 1.0);
  const ViewMetrics w = score_view(a, random_unit({1, 3, 16, 16}, 7), Tensor::full({1, 1, 16, 16}, 1.0), enc, emb);
  EXPECT_TRUE(std::isfinite(w.psnr));
  EXPECT_GE(w.id_similarity, -1.0);
  EXPECT_LE(w.id_similarity, 1.0);
}

class EvalFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    pcfg.resolution = 16;
    m.generator = &gen;
    m.encoder = &enc;
    m.svinet = &net;
    const Dataset data = make_synthetic_dataset(gen, pcfg, 3, 8);
    records = {{quantize_8bit(data[0].image), data[0].pose, "a"},
               {quantize_8bit(data[1].image), data[1].pose, "a"},
               {quantize_8bit(data[2].image), data[2].pose, "b"}};
  }
  PipelineConfig pcfg;
  Generator gen{detail::small_generator_config(), 1};
  Encoder enc{detail::small_encoder_config(), 2};
  SVINet net{detail::small_svinet_config(), 3};
  Models m;
  RandomConvIdentity emb;
  std::vector<EvalRecord> records;
};

TEST_F(EvalFixture, HeldOutAndRoundTripViews) {
  const MetricsReport r = evaluate(records, m, pcfg, emb);
  ASSERT_EQ(r.views.size(), 2u);
  EXPECT_EQ(r.views[0].kind, "held_out");
  EXPECT_EQ(r.views[0].source, 0);
  EXPECT_EQ(r.views[0].target, 1);
  EXPECT_EQ(r.views[1].kind, "round_trip");
  EXPECT_EQ(r.views[1].subject, "b");
  for (const ViewMetrics& v : r.views) {
    EXPECT_TRUE(std::isfinite(v.psnr));
    EXPECT_GT(v.visible_fraction, 0.0);
  }
  EXPECT_NEAR(r.mean_psnr, (r.views[0].psnr + r.views[1].psnr) / 2.0, 1e-12);
}

TEST_F(EvalFixture, ReportRecomputesExactlyFromSavedImages) {
  TempDir tmp;
  EvalOptions opt;
  opt.save_dir = tmp.path().string();
  opt.seed = 3;
  const MetricsReport r = evaluate(records, m, pcfg, emb, opt);
  const MetricsReport again = rescore_saved(opt.save_dir, r.views, enc, emb);
  ASSERT_EQ(again.views.size(), r.views.size());
  for (std::size_t k = 0; k < r.views.size(); ++k) {
    EXPECT_EQ(again.views[k].psnr, r.views[k].psnr);
    EXPECT_EQ(again.views[k].id_similarity, r.views[k].id_similarity);
    EXPECT_EQ(again.views[k].consistency, r.views[k].consistency);
    EXPECT_EQ(again.views[k].visible_fraction, r.views[k].visible_fraction);
  }
  EXPECT_EQ(report_to_json(again).dump(), report_to_json(r).dump());
}

TEST_F(EvalFixture, SameSeedSameReport) {
  EvalOptions opt;
  opt.seed = 11;
  EXPECT_EQ(report_to_json(evaluate(records, m, pcfg, emb, opt)).dump(),
            report_to_json(evaluate(records, m, pcfg, emb, opt)).dump());
}

TEST(MetricsReportFormat, JsonSchemaIsStable) {
  MetricsReport r;
  ViewMetrics v;
  v.subject = "s0";
  v.kind = "held_out";
  v.source = 0;
  v.target = 1;
  v.psnr = 25.5;
  v.id_similarity = 0.75;
  v.consistency = 0.125;
  v.visible_fraction = 0.5;
  r.views.push_back(v);
  v.psnr = std::numeric_limits<double>::infinity();
  v.kind = "round_trip";
  r.views.push_back(v);
  finalize_report(r);
  EXPECT_EQ(r.infinite_psnr, 1);
  EXPECT_EQ(r.mean_psnr, 25.5);
  EXPECT_EQ(report_to_json(r).dump(),
            R"({"schema":"warpfill.metrics.v1","summary":{"views":2,"mean_psnr":25.5,"infinite_psnr":1,)"
            R"("mean_id_similarity":0.75,"mean_consistency":0.125},"views":[{"subject":"s0","kind":"held_out",)"
            R"("source":0,"target":1,"psnr":25.5,"id_similarity":0.75,"consistency":0.125,"visible_fraction":0.5},)"
            R"({"subject":"s0","kind":"round_trip","source":0,"target":1,"psnr":"inf","id_similarity":0.75,)"
            R"("consistency":0.125,"visible_fraction":0.5}]})");
  const std::string csv = report_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "subject,kind,source,target,psnr,id_similarity,consistency,visible_fraction");
}

// ---- Directions and key/value text ---------------------------------------------

TEST(Direction, SaveLoadRoundTrip) {
  TempDir tmp;
  const Tensor d = random_unit({1, 3, 4}, 9);
  save_direction(tmp.file("d.txt"), d);
  EXPECT_EQ(load_direction(tmp.file("d.txt"), 3, 4).data(), d.data());
}

TEST(Direction, ErrorsNameTheLine) {
  TempDir tmp;
  write_text(tmp.file("short.txt"), "# dir\n1 2 3 4\n1 2 3\n1 2 3 4\n");
  try {
    load_direction(tmp.file("short.txt"), 3, 4);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  write_text(tmp.file("rows.txt"), "1 2 3 4\n");
  EXPECT_THROW(load_direction(tmp.file("rows.txt"), 3, 4), ParseError);
  write_text(tmp.file("nan.txt"), "1 2 nan 4\n");
  EXPECT_THROW(load_direction(tmp.file("nan.txt"), 1, 4), ParseError);
  EXPECT_THROW(load_direction(tmp.file("missing.txt"), 1, 4), std::runtime_error);
}

TEST(KeyValues, ParsesSnapshotLines) {
  const auto kv = parse_key_values("a = 1\n# c\n\nb=two words\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two words");
  EXPECT_EQ(kv.size(), 2u);
}

// ---- Checkpoints ---------------------------------------------------------------

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.kind = "encoder";
  ck.iteration = 42;
  ck.seed = 7;
  ck.config = "lr = 0.0001\n";
  ck.rng_state = "1 2 3";
  ck.add("a", random_unit({2, 3}, 1));
  ck.add("b", Tensor::scalar(-0.0));
  ck.add("c", Tensor::from({1}, {std::numeric_limits<double>::denorm_min()}));
  return ck;
}

TEST(CheckpointFormat, SaveLoadSaveIsByteIdentical) {
  TempDir tmp;
  const Checkpoint ck = sample_checkpoint();
  save_checkpoint(tmp.file("a.ckpt"), ck);
  const Checkpoint back = load_checkpoint(tmp.file("a.ckpt"));
  save_checkpoint(tmp.file("b.ckpt"), back);
  EXPECT_EQ(slurp(tmp.file("a.ckpt")), slurp(tmp.file("b.ckpt")));
  EXPECT_EQ(back.kind, "encoder");
  EXPECT_EQ(back.iteration, 42u);
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.rng_state, ck.rng_state);
  EXPECT_EQ(back.at("a").data(), ck.at("a").data());
  EXPECT_TRUE(std::signbit(back.at("b").item()));
  EXPECT_EQ(back.at("c").item(), std::numeric_limits<double>::denorm_min());
}

TEST(CheckpointFormat, ModelParametersRoundTrip) {
  TempDir tmp;
  const Encoder a(detail::small_encoder_config(), 1);
  Encoder b(detail::small_encoder_config(), 2);
  Checkpoint ck;
  ck.kind = "encoder";
  ck.add_params(a.params());
  save_checkpoint(tmp.file("e.ckpt"), ck);
  load_checkpoint(tmp.file("e.ckpt")).load_params(b.params());
  EXPECT_EQ(a.params().snapshot(), b.params().snapshot());
  SVINet net(detail::small_svinet_config(), 1);
  EXPECT_THROW(load_checkpoint(tmp.file("e.ckpt")).load_params(net.params()), std::runtime_error);
  EXPECT_THROW(load_checkpoint_of_kind(tmp.file("e.ckpt"), "svinet"), std::runtime_error);
}

TEST(CheckpointFormat, CorruptInputsAreRejected) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_THROW(deserialize_checkpoint("NOTACKPT" + bytes.substr(8)), std::runtime_error);
  for (std::size_t cut : {std::size_t{4}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, cut)), std::runtime_error) << "cut at " << cut;
  }
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), std::runtime_error);
  std::string version = bytes;
  version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(version), std::runtime_error);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), std::runtime_error);
}

}  // namespace
}  // namespace warpfill
