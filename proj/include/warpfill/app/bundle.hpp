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


// Loads the generator / encoder / SVINet triple used by the command-line
// tools from checkpoints.
//
// The generator is a fixed stand-in for a pretrained 3D GAN: its parameters
// come from a seed unless a "generator" checkpoint (written by pivotal tuning)
// is given. Encoder and SVINet parameters come from their training
// checkpoints; the SVINet ablation switches are restored from the checkpoint's
// configuration snapshot.

#pragma once

#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "warpfill/app/checkpoint.hpp"
#include "warpfill/app/manifest.hpp"
#include "warpfill/encoder.hpp"
#include "warpfill/generator.hpp"
#include "warpfill/pipeline.hpp"
#include "warpfill/svinet.hpp"

namespace warpfill {

// Parses "key = value" lines ('#' comments, blank lines ignored).
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  int row = 0;
  for (std::string line; std::getline(is, line);) {
    ++row;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("key-value line " + std::to_string(row) + ": missing '='");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

struct ModelPaths {
  std::string generator;  // optional "generator" checkpoint
  std::string encoder;    // "encoder" checkpoint
  std::string svinet;     // "svinet" checkpoint
  std::uint64_t generator_seed = 1;
};

inline Checkpoint generator_checkpoint(const Generator& gen, std::uint64_t seed) {
  Checkpoint ck;
  ck.kind = "generator";
  ck.seed = seed;
  ck.add_params(gen.params());
  return ck;
}

inline Checkpoint load_checkpoint_of_kind(const std::string& path, const std::string& kind) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != kind) {
    throw std::runtime_error("checkpoint '" + path + "' holds a '" + ck.kind + "' model, expected '" + kind + "'");
  }
  return ck;
}

class ModelBundle {
 public:
  explicit ModelBundle(const ModelPaths& paths, PipelineConfig pcfg = {})
      : pcfg_(pcfg),
        generator_(std::make_unique<Generator>(GeneratorConfig{}, paths.generator_seed)),
        encoder_(std::make_unique<Encoder>(EncoderConfig::for_generator(generator_->config(), pcfg.resolution), 2)),
        svinet_(std::make_unique<SVINet>(SVINetConfig{}, 3)) {
    pcfg_.validate();
    if (!paths.generator.empty()) load_checkpoint_of_kind(paths.generator, "generator").load_params(generator_->params());
    if (!paths.encoder.empty()) {
      load_checkpoint_of_kind(paths.encoder, "encoder").load_params(encoder_->params());
      has_encoder_ = true;
    }
    if (!paths.svinet.empty()) {
      const Checkpoint ck = load_checkpoint_of_kind(paths.svinet, "svinet");
      ck.load_params(svinet_->params());
      const auto kv = parse_key_values(ck.config);
      if (auto it = kv.find("use_modulation"); it != kv.end()) svinet_->mutable_config().use_modulation = it->second == "1";
      if (auto it = kv.find("use_symmetry"); it != kv.end()) svinet_->mutable_config().use_symmetry = it->second == "1";
      has_svinet_ = true;
    }
  }

  const PipelineConfig& pipeline() const { return pcfg_; }
  Generator& generator() { return *generator_; }
  const Generator& generator() const { return *generator_; }
  Encoder& encoder() { return *encoder_; }
  const Encoder& encoder() const { return *encoder_; }
  SVINet& svinet() { return *svinet_; }
  const SVINet& svinet() const { return *svinet_; }
  bool has_trained_encoder() const { return has_encoder_; }
  bool has_trained_svinet() const { return has_svinet_; }

  Models models() const {
    Models m;
    m.generator = generator_.get();
    m.encoder = encoder_.get();
    m.svinet = svinet_.get();
    return m;
  }

 private:
  PipelineConfig pcfg_;
  std::unique_ptr<Generator> generator_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<SVINet> svinet_;
  bool has_encoder_ = false;
  bool has_svinet_ = false;
};

// Attribute direction file: L rows of d whitespace-separated numbers
// ('#' comments and blank lines ignored). Returns [1, L, d].
inline LatentCode load_direction(const std::string& path, int levels, int dim) {
  std::istringstream is(read_text_file(path));
  std::vector<double> values;
  int rows = 0, line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    int count = 0;
    for (std::string tok; ls >> tok; ++count) {
      double v;
      if (!detail::parse_double(tok, v)) {
        throw ParseError("direction '" + path + "' line " + std::to_string(line_no) + ": '" + tok + "' is not a finite number");
      }
      values.push_back(v);
    }
    if (count != dim) {
      throw ParseError("direction '" + path + "' line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values, got " + std::to_string(count));
    }
    ++rows;
  }
  if (rows != levels) {
    throw ParseError("direction '" + path + "': expected " + std::to_string(levels) + " rows, got " + std::to_string(rows));
  }
  return Tensor::from({1, levels, dim}, values);
}

inline void save_direction(const std::string& path, const LatentCode& d) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << std::setprecision(17);
  for (int l = 0; l < d.dim(1); ++l) {
    for (int k = 0; k < d.dim(2); ++k) f << (k ? " " : "") << d.data()[static_cast<std::size_t>(l) * d.dim(2) + k];
    f << "\n";
  }
}

}  // namespace warpfill
