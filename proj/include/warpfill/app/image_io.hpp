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


// 8-bit PNG and float PFM image IO.
//
// Pixel conversion between bytes b in [0, 255] and the internal range
// [-1, 1]:   x = b / 127.5 - 1,   b = round_half_even((x + 1) * 127.5)
// clamped to [0, 255]. Byte -> real -> byte is the identity.

#pragma once

#include <png.h>

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/tensor.hpp"

namespace warpfill {

inline double byte_to_unit(std::uint8_t b) { return b / 127.5 - 1.0; }

inline std::uint8_t unit_to_byte(double x) {
  if (std::isnan(x)) throw std::invalid_argument("unit_to_byte: NaN pixel value");
  const double v = std::clamp((x + 1.0) * 127.5, 0.0, 255.0);
  // nearbyint rounds half to even under the default rounding mode.
  return static_cast<std::uint8_t>(std::nearbyint(v));
}

// Reads any PNG as RGB -> [1, 3, H, W] in [-1, 1].
inline Tensor read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw std::runtime_error("read_png: cannot read '" + path + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw std::runtime_error("read_png: decoding '" + path + "' failed: " + msg);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  Tensor t = Tensor::zeros({1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        t.data()[(static_cast<std::size_t>(c) * h + y) * w + x] = byte_to_unit(buf[(static_cast<std::size_t>(y) * w + x) * 3 + c]);
      }
    }
  }
  return t;
}

// Writes sample `index` of an [N, C, H, W] tensor (C = 1 or 3) in [-1, 1].
inline void write_png(const std::string& path, const Tensor& image, int index = 0) {
  if (image.rank() != 4 || (image.dim(1) != 3 && image.dim(1) != 1)) {
    throw std::invalid_argument("write_png: expected [N,3|1,H,W], got " + shape_str(image.shape()));
  }
  const int c = image.dim(1), h = image.dim(2), w = image.dim(3);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * c);
  const double* src = image.data().data() + static_cast<std::size_t>(index) * c * h * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k = 0; k < c; ++k) {
        buf[(static_cast<std::size_t>(y) * w + x) * c + k] = unit_to_byte(src[(static_cast<std::size_t>(k) * h + y) * w + x]);
      }
    }
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("write_png: cannot write '" + path + "': " + img.message);
  }
}

// Quantises through the 8-bit PNG representation without touching disk.
inline Tensor quantize_8bit(const Tensor& image) {
  Tensor out = image.detach();
  for (double& v : out.data()) v = byte_to_unit(unit_to_byte(v));
  return out;
}

// Single-channel PFM ("Pf", little-endian, rows stored bottom to top).
inline void write_pfm(const std::string& path, const Tensor& map, int index = 0) {
  if (map.rank() != 4 || map.dim(1) != 1) throw std::invalid_argument("write_pfm: expected [N,1,H,W]");
  const int h = map.dim(2), w = map.dim(3);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_pfm: cannot open '" + path + "'");
  f << "Pf\n" << w << " " << h << "\n-1.0\n";
  const double* src = map.data().data() + static_cast<std::size_t>(index) * h * w;
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      const float v = static_cast<float>(src[static_cast<std::size_t>(y) * w + x]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw std::runtime_error("write_pfm: write to '" + path + "' failed");
}

inline Tensor read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_pfm: cannot open '" + path + "'");
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  f >> magic >> w >> h >> scale;
  f.get();
  if (magic != "Pf" || w <= 0 || h <= 0) throw std::runtime_error("read_pfm: '" + path + "' is not a single-channel PFM");
  if (scale > 0.0) throw std::runtime_error("read_pfm: big-endian PFM is not supported");
  Tensor t = Tensor::zeros({1, 1, h, w});
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      float v;
      if (!f.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("read_pfm: '" + path + "' is truncated");
      t.data()[static_cast<std::size_t>(y) * w + x] = v;
    }
  }
  return t;
}

// Tiles equally sized [1, C, H, W] images into rows; missing cells are black.
inline Tensor make_grid(const std::vector<std::vector<Tensor>>& rows, int pad = 2) {
  if (rows.empty()) throw std::invalid_argument("make_grid: no rows");
  int h = 0, w = 0, cols = 0;
  for (const auto& r : rows) {
    cols = std::max(cols, static_cast<int>(r.size()));
    for (const Tensor& t : r) {
      if (h == 0) {
        h = t.dim(2);
        w = t.dim(3);
      }
      if (t.rank() != 4 || t.dim(1) != 3 || t.dim(2) != h || t.dim(3) != w) {
        throw std::invalid_argument("make_grid: images must share an [1,3,H,W] shape");
      }
    }
  }
  if (h == 0) throw std::invalid_argument("make_grid: no images");
  const int gh = static_cast<int>(rows.size()) * (h + pad) + pad, gw = cols * (w + pad) + pad;
  Tensor g = Tensor::full({1, 3, gh, gw}, -1.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const int oy = pad + static_cast<int>(r) * (h + pad), ox = pad + static_cast<int>(c) * (w + pad);
      for (int k = 0; k < 3; ++k) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            g.data()[(static_cast<std::size_t>(k) * gh + oy + y) * gw + ox + x] =
                rows[r][c].data()[(static_cast<std::size_t>(k) * h + y) * w + x];
          }
        }
      }
    }
  }
  return g;
}

// Broadcasts a [1, 1, H, W] map in [0, 1] to a displayable [1, 3, H, W] image.
inline Tensor mask_to_image(const Tensor& mask) {
  const int h = mask.dim(2), w = mask.dim(3);
  Tensor out = Tensor::zeros({1, 3, h, w});
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) out.data()[k * h * w + i] = 2.0 * mask.data()[i] - 1.0;
  }
  return out;
}

}  // namespace warpfill
