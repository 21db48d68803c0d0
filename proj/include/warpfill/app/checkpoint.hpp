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


// Single-file checkpoint container of named float64 arrays.
//
// Layout (all integers little-endian):
//   bytes 0..7   magic "WFCKPT\0\1"
//   u32          format version (1)
//   str          kind (e.g. "encoder", "svinet")
//   u64          iteration
//   u64          seed
//   str          configuration snapshot (key = value lines)
//   str          RNG state
//   u32          entry count, then per entry:
//     str        name
//     u8         precision tag (1 = IEEE-754 float64)
//     u32        rank, followed by rank x u32 dimensions
//     f64[numel] values
// where str = u32 byte length followed by the bytes.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/params.hpp"
#include "warpfill/core/tensor.hpp"

namespace warpfill {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

struct Checkpoint {
  std::string kind;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::string config;
  std::string rng_state;
  std::vector<NamedTensor> entries;

  void add(const std::string& name, const Tensor& t) { entries.push_back({name, t.detach()}); }
  void add_params(const ParamSet& params) {
    for (const auto& e : params.entries()) add(e.name, e.tensor);
  }
  void add_all(const std::vector<NamedTensor>& items) {
    for (const auto& e : items) add(e.name, e.tensor);
  }
  bool has(const std::string& name) const { return find(name) != nullptr; }
  const NamedTensor* find(const std::string& name) const {
    for (const auto& e : entries) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
  const Tensor& at(const std::string& name) const {
    const NamedTensor* e = find(name);
    if (!e) throw std::runtime_error("checkpoint: missing entry '" + name + "'");
    return e->tensor;
  }
  std::vector<double> values(const std::string& name) const { return at(name).data(); }

  // Copies stored values into every parameter of `params` (shapes must match).
  void load_params(const ParamSet& params) const {
    for (const auto& e : params.entries()) {
      const Tensor& src = at(e.name);
      if (src.shape() != e.tensor.shape()) {
        throw std::runtime_error("checkpoint: entry '" + e.name + "' has shape " + shape_str(src.shape()) +
                                 ", parameter expects " + shape_str(e.tensor.shape()));
      }
      e.tensor.node()->value = src.data();
    }
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& data) : d_(data) {}
  void need(std::size_t n) const {
    if (pos_ + n > d_.size()) throw std::runtime_error("checkpoint: truncated data at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, d_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, d_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(d_[pos_++]);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = d_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, std::size_t n) {
    need(8 * n);
    std::memcpy(dst, d_.data() + pos_, 8 * n);
    pos_ += 8 * n;
  }
  bool done() const { return pos_ == d_.size(); }

 private:
  const std::string& d_;
  std::size_t pos_ = 0;
};

inline constexpr char kCheckpointMagic[8] = {'W', 'F', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kFloat64Tag = 1;

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(detail::kCheckpointMagic, 8);
  detail::put_u32(out, detail::kCheckpointVersion);
  detail::put_str(out, ck.kind);
  detail::put_u64(out, ck.iteration);
  detail::put_u64(out, ck.seed);
  detail::put_str(out, ck.config);
  detail::put_str(out, ck.rng_state);
  detail::put_u32(out, static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& e : ck.entries) {
    detail::put_str(out, e.name);
    out.push_back(static_cast<char>(detail::kFloat64Tag));
    detail::put_u32(out, static_cast<std::uint32_t>(e.tensor.rank()));
    for (int d : e.tensor.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    out.append(reinterpret_cast<const char*>(e.tensor.data().data()), 8 * e.tensor.numel());
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& data) {
  if (data.size() < 8 || std::memcmp(data.data(), detail::kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic (not a warpfill checkpoint)");
  }
  detail::ByteReader r(data);
  for (int i = 0; i < 8; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != detail::kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.kind = r.str();
  ck.iteration = r.u64();
  ck.seed = r.u64();
  ck.config = r.str();
  ck.rng_state = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name = r.str();
    const std::uint8_t tag = r.u8();
    if (tag != detail::kFloat64Tag) throw std::runtime_error("checkpoint: entry '" + e.name + "' has unknown precision tag");
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw std::runtime_error("checkpoint: entry '" + e.name + "' has implausible rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<int>(r.u32()));
      numel *= static_cast<std::size_t>(shape.back());
    }
    r.need(8 * numel);
    std::vector<double> values(numel);
    r.doubles(values.data(), numel);
    e.tensor = Tensor::from(shape, std::move(values));
    ck.entries.push_back(std::move(e));
  }
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes after the last entry");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace warpfill
