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

// Dense, convolutional and resampling layers on NCHW tensors.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "warpfill/core/ops.hpp"

namespace warpfill {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

struct ConvGeom {
  int n, ci, h, w, co, k, stride, pad, ho, wo;
  int cols() const { return ci * k * k; }
  int pixels() const { return ho * wo; }
};

inline void im2col(const double* x, const ConvGeom& g, double* col) {
  const int p = g.pixels();
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        double* row = col + ((c * g.k + ky) * g.k + kx) * static_cast<std::size_t>(p);
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            row[oy * g.wo + ox] =
                (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w) ? x[(c * g.h + iy) * g.w + ix] : 0.0;
          }
        }
      }
    }
  }
}

inline void col2im(const double* col, const ConvGeom& g, double* x) {
  const int p = g.pixels();
  for (int c = 0; c < g.ci; ++c) {
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const double* row = col + ((c * g.k + ky) * g.k + kx) * static_cast<std::size_t>(p);
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) x[(c * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// y = x W^T + b for x [N, in], W [out, in], b [out] (optional).
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor()) {
  const int n = x.dim(0), out = weight.dim(0), in = weight.dim(1);
  if (static_cast<int>(x.numel()) != n * in) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  std::vector<double> y(static_cast<std::size_t>(n) * out);
  detail::CMapMat X(x.data().data(), n, in), W(weight.data().data(), out, in);
  detail::MapMat Y(y.data(), n, out);
  Y.noalias() = X * W.transpose();
  if (bias.defined()) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < out; ++j) y[i * out + j] += bias.data()[j];
    }
  }
  return detail::make_result({n, out}, std::move(y), {x, weight, bias}, [x, weight, bias, n, in, out](Node& self) {
    detail::CMapMat G(self.grad.data(), n, out);
    if (x.requires_grad()) {
      detail::MapMat GX(x.node()->grad_buffer().data(), n, in);
      GX.noalias() += G * detail::CMapMat(weight.data().data(), out, in);
    }
    if (weight.requires_grad()) {
      detail::MapMat GW(weight.node()->grad_buffer().data(), out, in);
      GW.noalias() += G.transpose() * detail::CMapMat(x.data().data(), n, in);
    }
    if (bias.defined() && bias.requires_grad()) {
      auto& gb = bias.node()->grad_buffer();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < out; ++j) gb[j] += self.grad[i * out + j];
      }
    }
  });
}

// 2-D convolution with zero padding. `weight` is either shared [Co, Ci, k, k]
// or per-sample [N, Co, Ci, k, k] (the modulated-convolution case).
inline Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor(), int stride = 1,
                     int pad = -1) {
  if (x.rank() != 4) throw std::invalid_argument("conv2d: input must be NCHW, got " + shape_str(x.shape()));
  const bool per_sample = weight.rank() == 5;
  const int off = per_sample ? 1 : 0;
  detail::ConvGeom g{};
  g.n = x.dim(0);
  g.ci = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.co = weight.dim(off);
  g.k = weight.dim(off + 2);
  g.stride = stride;
  g.pad = pad < 0 ? g.k / 2 : pad;
  if (weight.dim(off + 1) != g.ci || weight.dim(off + 3) != g.k) {
    throw std::invalid_argument("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                                shape_str(x.shape()));
  }
  if (per_sample && weight.dim(0) != g.n) throw std::invalid_argument("conv2d: per-sample weight batch mismatch");
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;
  const std::size_t in_sz = static_cast<std::size_t>(g.ci) * g.h * g.w;
  const std::size_t out_sz = static_cast<std::size_t>(g.co) * g.pixels();
  const std::size_t w_sz = static_cast<std::size_t>(g.co) * g.cols();
  std::vector<double> y(static_cast<std::size_t>(g.n) * out_sz);
  std::vector<double> col(static_cast<std::size_t>(g.cols()) * g.pixels());
  for (int s = 0; s < g.n; ++s) {
    detail::im2col(x.data().data() + s * in_sz, g, col.data());
    detail::CMapMat W(weight.data().data() + (per_sample ? s * w_sz : 0), g.co, g.cols());
    detail::MapMat Y(y.data() + s * out_sz, g.co, g.pixels());
    Y.noalias() = W * detail::CMapMat(col.data(), g.cols(), g.pixels());
    if (bias.defined()) {
      for (int c = 0; c < g.co; ++c) Y.row(c).array() += bias.data()[c];
    }
  }
  return detail::make_result(
      {g.n, g.co, g.ho, g.wo}, std::move(y), {x, weight, bias},
      [x, weight, bias, g, in_sz, out_sz, w_sz, per_sample](Node& self) {
        std::vector<double> col(static_cast<std::size_t>(g.cols()) * g.pixels());
        std::vector<double> dcol(col.size());
        for (int s = 0; s < g.n; ++s) {
          detail::CMapMat G(self.grad.data() + s * out_sz, g.co, g.pixels());
          detail::CMapMat W(weight.data().data() + (per_sample ? s * w_sz : 0), g.co, g.cols());
          if (weight.requires_grad()) {
            detail::im2col(x.data().data() + s * in_sz, g, col.data());
            detail::MapMat GW(weight.node()->grad_buffer().data() + (per_sample ? s * w_sz : 0), g.co, g.cols());
            GW.noalias() += G * detail::CMapMat(col.data(), g.cols(), g.pixels()).transpose();
          }
          if (x.requires_grad()) {
            detail::MapMat DC(dcol.data(), g.cols(), g.pixels());
            DC.noalias() = W.transpose() * G;
            detail::col2im(dcol.data(), g, x.node()->grad_buffer().data() + s * in_sz);
          }
          if (bias.defined() && bias.requires_grad()) {
            auto& gb = bias.node()->grad_buffer();
            for (int c = 0; c < g.co; ++c) gb[c] += G.row(c).sum();
          }
        }
      });
}

// Style modulation and (optional) demodulation of convolution weights:
//   w'_{jik}  = s_i * w_{jik}
//   w''_{jik} = w'_{jik} / sqrt(sum_{i,k} w'_{jik}^2 + eps)
// weight [Co, Ci, k, k], style [N, Ci] -> [N, Co, Ci, k, k].
inline Tensor modulate_weights(const Tensor& weight, const Tensor& style, double eps, bool demodulate = true) {
  if (weight.rank() != 4) throw std::invalid_argument("modulate_weights: weight must be [Co,Ci,k,k]");
  const int co = weight.dim(0), ci = weight.dim(1), kk = weight.dim(2) * weight.dim(3);
  if (style.rank() != 2 || style.dim(1) != ci) {
    throw std::invalid_argument("modulate_weights: style " + shape_str(style.shape()) + " needs " +
                                std::to_string(ci) + " entries per sample");
  }
  const int n = style.dim(0);
  const std::size_t per = static_cast<std::size_t>(co) * ci * kk;
  std::vector<double> out(static_cast<std::size_t>(n) * per);
  std::vector<double> inv_norm(static_cast<std::size_t>(n) * co, 1.0);
  const auto& w = weight.data();
  const auto& s = style.data();
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < co; ++j) {
      double ss = 0.0;
      for (int i = 0; i < ci; ++i) {
        for (int k = 0; k < kk; ++k) {
          const double v = s[b * ci + i] * w[(j * ci + i) * kk + k];
          out[b * per + (j * ci + i) * kk + k] = v;
          ss += v * v;
        }
      }
      if (demodulate) {
        const double inv = 1.0 / std::sqrt(ss + eps);
        inv_norm[b * co + j] = inv;
        for (std::size_t q = 0; q < static_cast<std::size_t>(ci) * kk; ++q) out[b * per + j * ci * kk + q] *= inv;
      }
    }
  }
  Shape shape{n, co, ci, weight.dim(2), weight.dim(3)};
  return detail::make_result(shape, std::move(out), {weight, style},
                             [weight, style, n, co, ci, kk, per, inv_norm, demodulate](Node& self) {
                               const auto& w = weight.data();
                               const auto& s = style.data();
                               std::vector<double> gprime(static_cast<std::size_t>(ci) * kk);
                               for (int b = 0; b < n; ++b) {
                                 for (int j = 0; j < co; ++j) {
                                   const double* g = self.grad.data() + b * per + j * ci * kk;
                                   const double inv = inv_norm[b * co + j];
                                   if (demodulate) {
                                     // d w''/d w' = (I - w'' w''^T) / norm
                                     const double* wpp = self.value.data() + b * per + j * ci * kk;
                                     double dot = 0.0;
                                     for (std::size_t q = 0; q < gprime.size(); ++q) dot += g[q] * wpp[q];
                                     for (std::size_t q = 0; q < gprime.size(); ++q) gprime[q] = (g[q] - wpp[q] * dot) * inv;
                                   } else {
                                     std::copy_n(g, gprime.size(), gprime.begin());
                                   }
                                   for (int i = 0; i < ci; ++i) {
                                     for (int k = 0; k < kk; ++k) {
                                       const double gp = gprime[i * kk + k];
                                       detail::accumulate(weight, (j * ci + i) * kk + k, gp * s[b * ci + i]);
                                       detail::accumulate(style, b * ci + i, gp * w[(j * ci + i) * kk + k]);
                                     }
                                   }
                                 }
                               }
                             });
}

// Convolution whose weights are modulated per sample by `style` [N, Ci].
inline Tensor modulated_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Tensor& style,
                               double eps, bool demodulate = true) {
  return conv2d(x, modulate_weights(weight, style, eps, demodulate), bias, 1, -1);
}

inline Tensor upsample2x(const Tensor& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<double> y(static_cast<std::size_t>(n) * c * 4 * h * w);
  for (int p = 0; p < n * c; ++p) {
    for (int yy = 0; yy < 2 * h; ++yy) {
      for (int xx = 0; xx < 2 * w; ++xx) {
        y[(static_cast<std::size_t>(p) * 2 * h + yy) * 2 * w + xx] = x.data()[(static_cast<std::size_t>(p) * h + yy / 2) * w + xx / 2];
      }
    }
  }
  return detail::make_result({n, c, 2 * h, 2 * w}, std::move(y), {x}, [x, n, c, h, w](Node& self) {
    auto& gx = x.node()->grad_buffer();
    for (int p = 0; p < n * c; ++p) {
      for (int yy = 0; yy < 2 * h; ++yy) {
        for (int xx = 0; xx < 2 * w; ++xx) {
          gx[(static_cast<std::size_t>(p) * h + yy / 2) * w + xx / 2] += self.grad[(static_cast<std::size_t>(p) * 2 * h + yy) * 2 * w + xx];
        }
      }
    }
  });
}

// Non-overlapping average pooling by an integer factor.
inline Tensor avg_pool(const Tensor& x, int factor) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % factor || w % factor) throw std::invalid_argument("avg_pool: size not divisible by factor");
  const int ho = h / factor, wo = w / factor;
  const double inv = 1.0 / (factor * factor);
  std::vector<double> y(static_cast<std::size_t>(n) * c * ho * wo, 0.0);
  for (int p = 0; p < n * c; ++p) {
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        y[(static_cast<std::size_t>(p) * ho + yy / factor) * wo + xx / factor] += inv * x.data()[(static_cast<std::size_t>(p) * h + yy) * w + xx];
      }
    }
  }
  return detail::make_result({n, c, ho, wo}, std::move(y), {x}, [x, n, c, h, w, ho, wo, factor, inv](Node& self) {
    auto& gx = x.node()->grad_buffer();
    for (int p = 0; p < n * c; ++p) {
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          gx[(static_cast<std::size_t>(p) * h + yy) * w + xx] += inv * self.grad[(static_cast<std::size_t>(p) * ho + yy / factor) * wo + xx / factor];
        }
      }
    }
  });
}

}  // namespace warpfill
