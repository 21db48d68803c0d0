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


// End-to-end checks of the command-line tool (path injected by the build).

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "warpfill/app/image_io.hpp"
#include "warpfill/app/manifest.hpp"

namespace warpfill {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("warpfill_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the tool with `args`; returns the exit status and captures combined output.
  int run(const std::string& args) {
    const std::string cmd = std::string(WARPFILL_CLI_PATH) + " " + args + " > " + path("out.log") + " 2>&1";
    const int status = std::system(cmd.c_str());
    output = slurp(path("out.log"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  std::string output;
  fs::path dir_;
};

TEST_F(CliTest, SelfcheckPasses) {
  EXPECT_EQ(run("selfcheck"), 0) << output;
  EXPECT_NE(output.find("selfcheck: PASS"), std::string::npos) << output;
}

TEST_F(CliTest, SelfcheckFailsOnCorruptedEpsilon) {
  EXPECT_NE(run("selfcheck --corrupt-eps -1"), 0) << output;
  EXPECT_NE(output.find("selfcheck: FAIL"), std::string::npos) << output;
}

TEST_F(CliTest, MakeDatasetIsSeedReproducible) {
  ASSERT_EQ(run("--seed 5 -q make-dataset --out " + path("a") + " --subjects 2 --views 2"), 0) << output;
  ASSERT_EQ(run("--seed 5 -q make-dataset --out " + path("b") + " --subjects 2 --views 2"), 0) << output;
  ASSERT_EQ(run("--seed 6 -q make-dataset --out " + path("c") + " --subjects 2 --views 2"), 0) << output;
  int files = 0;
  for (const auto& e : fs::directory_iterator(path("a"))) {
    const std::string name = e.path().filename().string();
    EXPECT_EQ(slurp(e.path().string()), slurp(path("b/" + name))) << name;
    ++files;
  }
  EXPECT_EQ(files, 5);  // four images and poses.txt
  EXPECT_NE(slurp(path("a/poses.txt")), slurp(path("c/poses.txt")));
  const DatasetManifest m = ingest(path("a"));
  ASSERT_EQ(m.entries.size(), 4u);
  EXPECT_EQ(m.entries[0].subject, m.entries[1].subject);
  EXPECT_NE(m.entries[1].subject, m.entries[2].subject);
}

TEST_F(CliTest, TrainEncoderIsSeedReproducible) {
  ASSERT_EQ(run("--seed 2 -q make-dataset --out " + path("d") + " --subjects 2"), 0) << output;
  const std::string common = "-q train-encoder --data " + path("d") + " --iterations 2 --history ";
  ASSERT_EQ(run("--seed 3 " + common + path("h1.csv") + " --out " + path("e1.ckpt")), 0) << output;
  ASSERT_EQ(run("--seed 3 " + common + path("h2.csv") + " --out " + path("e2.ckpt")), 0) << output;
  EXPECT_EQ(slurp(path("e1.ckpt")), slurp(path("e2.ckpt")));
  EXPECT_EQ(slurp(path("h1.csv")), slurp(path("h2.csv")));
  EXPECT_FALSE(slurp(path("e1.ckpt")).empty());
}

TEST_F(CliTest, ConfigFileAppliesAndFlagsWin) {
  std::ofstream(path("run.cfg")) << "# defaults for the run\nseed = 4\n[make-dataset]\nsubjects = 3\nyaw-range = 0.3\n";
  ASSERT_EQ(run("--config " + path("run.cfg") + " -q make-dataset --out " + path("cfg")), 0) << output;
  EXPECT_EQ(ingest(path("cfg")).entries.size(), 3u);
  ASSERT_EQ(run("--config " + path("run.cfg") + " -q make-dataset --out " + path("flag") + " --subjects 1"), 0) << output;
  EXPECT_EQ(ingest(path("flag")).entries.size(), 1u);
  // The seed from the file matches an explicit --seed.
  ASSERT_EQ(run("--seed 4 -q make-dataset --out " + path("explicit") + " --subjects 3 --yaw-range 0.3"), 0) << output;
  EXPECT_EQ(slurp(path("cfg/poses.txt")), slurp(path("explicit/poses.txt")));
}

TEST_F(CliTest, WarpToSameCameraReproducesInput) {
  ASSERT_EQ(run("-q make-dataset --out " + path("w") + " --subjects 1"), 0) << output;
  const DatasetManifest m = ingest(path("w"));
  ASSERT_EQ(m.entries.size(), 1u);
  const auto [pose, k] = pose_from_record(m.entries[0].record);
  save_pose_file(path("pose.txt"), pose, k);
  write_pfm(path("depth.pfm"), Tensor::full({1, 1, 64, 64}, 2.7));
  ASSERT_EQ(run("-q warp --image " + m.entries[0].image_path + " --depth " + path("depth.pfm") + " --src-pose " +
                path("pose.txt") + " --dst-pose " + path("pose.txt") + " --out " + path("warped.png") + " --mask-out " +
                path("mask.png")),
            0)
      << output;
  EXPECT_EQ(read_png(path("warped.png")).data(), read_png(m.entries[0].image_path).data());
  for (double v : read_png(path("mask.png")).data()) EXPECT_EQ(v, -1.0);
}

TEST_F(CliTest, MalformedPoseFileReportsRow) {
  ASSERT_EQ(run("-q make-dataset --out " + path("m") + " --subjects 1"), 0) << output;
  std::ofstream(path("bad.txt")) << "# pose\n1 0 0 0 0 1 0 0 0 0 1 2.7 0 0 0 1 2 0 0.5 0 2 0.5 0 0\n";
  write_pfm(path("depth.pfm"), Tensor::full({1, 1, 64, 64}, 2.7));
  EXPECT_EQ(run("warp --image " + path("m/img_00000.png") + " --depth " + path("depth.pfm") + " --src-pose " +
                path("bad.txt") + " --dst-pose " + path("bad.txt")),
            2);
  EXPECT_NE(output.find("pose row 2"), std::string::npos) << output;
  EXPECT_NE(output.find("expected 25 floats, got 24"), std::string::npos) << output;
}

TEST_F(CliTest, UsageErrorsAreNonZero) {
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("train-encoder"), 0);
  EXPECT_NE(run("make-dataset --out " + path("x") + " --subjects 0"), 0);
  EXPECT_NE(run("train-encoder --data " + path("nope")), 0);
  EXPECT_EQ(run("--help"), 0);
}

}  // namespace
}  // namespace warpfill
