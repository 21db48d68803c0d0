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


// Pose files and dataset manifests.
//
// Pose rows are whitespace separated: an optional image path, then 25 floats
// (row-major 4x4 camera-to-world matrix followed by the row-major 3x3
// normalised intrinsics), then optional split and subject tags:
//     <image.png> m00 m01 ... m33 k00 ... k22 [split] [subject]
// Blank lines and lines starting with '#' are ignored.

#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/app/image_io.hpp"
#include "warpfill/geometry.hpp"
#include "warpfill/training.hpp"

namespace warpfill {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PoseRow {
  std::string image;  // empty when the row carries no path
  std::array<double, 25> record{};
  std::string split;
  std::string subject;
};

namespace detail {
inline bool parse_double(const std::string& tok, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(tok, &used);
    return used == tok.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}
}  // namespace detail

// Parses one non-comment row; `row` (1-based line number) locates errors.
inline PoseRow parse_pose_row(const std::string& line, int row, bool expect_path) {
  std::istringstream is(line);
  std::vector<std::string> toks;
  for (std::string t; is >> t;) toks.push_back(t);
  const std::string where = "pose row " + std::to_string(row);
  PoseRow out;
  std::size_t i = 0;
  if (expect_path) {
    if (toks.empty()) throw ParseError(where + ": missing image path");
    out.image = toks[i++];
  }
  int count = 0;
  for (; i < toks.size() && count < 25; ++i, ++count) {
    if (!detail::parse_double(toks[i], out.record[static_cast<std::size_t>(count)])) {
      throw ParseError(where + ": field " + std::to_string(count + 1) + " ('" + toks[i] + "') is not a finite number");
    }
  }
  if (count < 25) throw ParseError(where + ": expected 25 floats, got " + std::to_string(count));
  if (i < toks.size()) {
    double dummy;
    if (detail::parse_double(toks[i], dummy)) throw ParseError(where + ": expected 25 floats, got more");
    out.split = toks[i++];
  }
  if (i < toks.size()) out.subject = toks[i++];
  if (i < toks.size()) throw ParseError(where + ": unexpected trailing field '" + toks[i] + "'");
  try {
    pose_from_record(out.record);
  } catch (const std::invalid_argument& e) {
    throw ParseError(where + ": " + e.what());
  }
  return out;
}

inline std::vector<PoseRow> parse_pose_text(const std::string& text, bool expect_path) {
  std::vector<PoseRow> rows;
  std::istringstream is(text);
  int n = 0;
  for (std::string line; std::getline(is, line);) {
    ++n;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    rows.push_back(parse_pose_row(line, n, expect_path));
  }
  return rows;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string format_pose_row(const PoseRow& row) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (!row.image.empty()) os << row.image << ' ';
  for (std::size_t i = 0; i < 25; ++i) os << (i ? " " : "") << row.record[i];
  if (!row.split.empty()) os << ' ' << row.split;
  if (!row.subject.empty()) os << ' ' << row.subject;
  return os.str();
}

// A single pose: a file holding one row of 25 floats, optionally preceded by
// an image path (detected by a non-numeric first field).
inline std::pair<Pose, Intrinsics> load_pose_file(const std::string& path) {
  const std::string text = read_text_file(path);
  bool has_path = false;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    double dummy;
    has_path = !detail::parse_double(first, dummy);
    break;
  }
  const std::vector<PoseRow> rows = parse_pose_text(text, has_path);
  if (rows.size() != 1) throw ParseError("pose file '" + path + "' must contain exactly one pose row");
  return pose_from_record(rows[0].record);
}

inline void save_pose_file(const std::string& path, const Pose& pose, const Intrinsics& k) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  PoseRow row;
  row.record = pose_to_record(pose, k);
  f << format_pose_row(row) << "\n";
}

struct ManifestEntry {
  std::string image_path;  // resolved path
  std::array<double, 25> record{};
  std::string split;
  std::string subject;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;
};

// Validates a directory of images against its pose file (default
// <dir>/poses.txt). An empty directory without a pose file yields an empty
// manifest and a warning.
inline DatasetManifest ingest(const std::string& dir, const std::string& pose_file = "") {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("ingest: '" + dir + "' is not a directory");
  const std::string poses = pose_file.empty() ? (fs::path(dir) / "poses.txt").string() : pose_file;
  DatasetManifest m;
  if (!fs::exists(poses)) {
    if (fs::is_empty(dir)) {
      m.warnings.push_back("ingest: '" + dir + "' is empty; manifest has no entries");
      return m;
    }
    throw std::runtime_error("ingest: pose file '" + poses + "' not found");
  }
  for (const PoseRow& r : parse_pose_text(read_text_file(poses), true)) {
    ManifestEntry e;
    const fs::path p = fs::path(r.image).is_absolute() ? fs::path(r.image) : fs::path(dir) / r.image;
    if (!fs::exists(p)) throw std::runtime_error("ingest: image '" + p.string() + "' listed in '" + poses + "' not found");
    e.image_path = p.string();
    e.record = r.record;
    e.split = r.split;
    e.subject = r.subject;
    m.entries.push_back(e);
  }
  if (m.entries.empty()) m.warnings.push_back("ingest: pose file '" + poses + "' lists no images");
  return m;
}

// Loads manifest images; every image must be resolution x resolution.
inline Dataset load_dataset(const DatasetManifest& m, int resolution) {
  Dataset out;
  for (const ManifestEntry& e : m.entries) {
    Tensor img = read_png(e.image_path);
    if (img.dim(2) != resolution || img.dim(3) != resolution) {
      throw std::runtime_error("load_dataset: '" + e.image_path + "' is " + std::to_string(img.dim(3)) + "x" +
                               std::to_string(img.dim(2)) + ", expected " + std::to_string(resolution) + "x" +
                               std::to_string(resolution));
    }
    out.push_back({img, pose_from_record(e.record).first});
  }
  return out;
}

// Writes a dataset as PNGs plus poses.txt.
inline void write_dataset(const std::string& dir, const Dataset& data, const Intrinsics& k,
                          const std::vector<std::string>& subjects = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / "poses.txt");
  if (!f) throw std::runtime_error("write_dataset: cannot write poses.txt in '" + dir + "'");
  f << "# image, 16 extrinsic (camera-to-world, row-major), 9 intrinsic (normalised), split, subject\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream name;
    name << "img_" << std::setw(5) << std::setfill('0') << i << ".png";
    write_png((fs::path(dir) / name.str()).string(), data[i].image);
    PoseRow row;
    row.image = name.str();
    row.record = pose_to_record(data[i].pose, k);
    row.split = "train";
    row.subject = i < subjects.size() ? subjects[i] : "s" + std::to_string(i);
    f << format_pose_row(row) << "\n";
  }
}

}  // namespace warpfill
