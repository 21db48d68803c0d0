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

// Orthonormal real 2-D discrete Fourier transform over the spatial axes of
// NCHW tensors. The half spectrum [H, W/2+1] is stored as 2C real channels:
// real parts first, then imaginary parts. Feature maps here are at most a few
// dozen pixels wide, so the separable direct transform is used; its adjoint is
// the exact transpose, which keeps the backward pass trivially consistent.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "warpfill/core/tensor.hpp"

namespace warpfill {

namespace detail {

struct DftTables {
  int h, w, wf;
  std::vector<double> cos_h, sin_h;  // [k, n]
  std::vector<double> cos_w, sin_w;  // [l, m]
  double scale;

  DftTables(int h_, int w_) : h(h_), w(w_), wf(w_ / 2 + 1), scale(1.0 / std::sqrt(double(h_) * w_)) {
    cos_h.resize(static_cast<std::size_t>(h) * h);
    sin_h.resize(cos_h.size());
    for (int k = 0; k < h; ++k) {
      for (int n = 0; n < h; ++n) {
        const double a = 2.0 * std::numbers::pi * ((static_cast<long>(k) * n) % h) / h;
        cos_h[k * h + n] = std::cos(a);
        sin_h[k * h + n] = std::sin(a);
      }
    }
    cos_w.resize(static_cast<std::size_t>(wf) * w);
    sin_w.resize(cos_w.size());
    for (int l = 0; l < wf; ++l) {
      for (int m = 0; m < w; ++m) {
        const double a = 2.0 * std::numbers::pi * ((static_cast<long>(l) * m) % w) / w;
        cos_w[l * w + m] = std::cos(a);
        sin_w[l * w + m] = std::sin(a);
      }
    }
  }
  double hermitian_weight(int l) const { return (l == 0 || (w % 2 == 0 && l == w / 2)) ? 1.0 : 2.0; }
};

// x [H, W] -> (re, im) [H, Wf]
inline void rfft_plane(const DftTables& t, const double* x, double* re, double* im) {
  std::vector<double> ar(static_cast<std::size_t>(t.h) * t.wf), ai(ar.size());
  for (int n = 0; n < t.h; ++n) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int m = 0; m < t.w; ++m) {
        sr += x[n * t.w + m] * t.cos_w[l * t.w + m];
        si -= x[n * t.w + m] * t.sin_w[l * t.w + m];
      }
      ar[n * t.wf + l] = sr;
      ai[n * t.wf + l] = si;
    }
  }
  for (int k = 0; k < t.h; ++k) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int n = 0; n < t.h; ++n) {
        const double c = t.cos_h[k * t.h + n], s = t.sin_h[k * t.h + n];
        sr += ar[n * t.wf + l] * c + ai[n * t.wf + l] * s;
        si += ai[n * t.wf + l] * c - ar[n * t.wf + l] * s;
      }
      re[k * t.wf + l] = t.scale * sr;
      im[k * t.wf + l] = t.scale * si;
    }
  }
}

// Transpose of rfft_plane; accumulates into gx.
inline void rfft_plane_adjoint(const DftTables& t, const double* gre, const double* gim, double* gx) {
  std::vector<double> br(static_cast<std::size_t>(t.h) * t.wf), bi(br.size());
  for (int n = 0; n < t.h; ++n) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int k = 0; k < t.h; ++k) {
        const double c = t.cos_h[k * t.h + n], s = t.sin_h[k * t.h + n];
        sr += gre[k * t.wf + l] * c - gim[k * t.wf + l] * s;
        si += gre[k * t.wf + l] * s + gim[k * t.wf + l] * c;
      }
      br[n * t.wf + l] = sr;
      bi[n * t.wf + l] = si;
    }
  }
  for (int n = 0; n < t.h; ++n) {
    for (int m = 0; m < t.w; ++m) {
      double s = 0.0;
      for (int l = 0; l < t.wf; ++l) s += br[n * t.wf + l] * t.cos_w[l * t.w + m] - bi[n * t.wf + l] * t.sin_w[l * t.w + m];
      gx[n * t.w + m] += t.scale * s;
    }
  }
}

// (re, im) [H, Wf] -> x [H, W], Hermitian-completed real inverse.
inline void irfft_plane(const DftTables& t, const double* re, const double* im, double* x) {
  std::vector<double> br(static_cast<std::size_t>(t.h) * t.wf), bi(br.size());
  for (int n = 0; n < t.h; ++n) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int k = 0; k < t.h; ++k) {
        const double c = t.cos_h[k * t.h + n], s = t.sin_h[k * t.h + n];
        sr += re[k * t.wf + l] * c - im[k * t.wf + l] * s;
        si += re[k * t.wf + l] * s + im[k * t.wf + l] * c;
      }
      br[n * t.wf + l] = sr;
      bi[n * t.wf + l] = si;
    }
  }
  for (int n = 0; n < t.h; ++n) {
    for (int m = 0; m < t.w; ++m) {
      double s = 0.0;
      for (int l = 0; l < t.wf; ++l) {
        s += t.hermitian_weight(l) * (br[n * t.wf + l] * t.cos_w[l * t.w + m] - bi[n * t.wf + l] * t.sin_w[l * t.w + m]);
      }
      x[n * t.w + m] = t.scale * s;
    }
  }
}

// Transpose of irfft_plane; accumulates into (gre, gim).
inline void irfft_plane_adjoint(const DftTables& t, const double* gx, double* gre, double* gim) {
  std::vector<double> br(static_cast<std::size_t>(t.h) * t.wf), bi(br.size());
  for (int n = 0; n < t.h; ++n) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int m = 0; m < t.w; ++m) {
        sr += gx[n * t.w + m] * t.cos_w[l * t.w + m];
        si -= gx[n * t.w + m] * t.sin_w[l * t.w + m];
      }
      const double c = t.scale * t.hermitian_weight(l);
      br[n * t.wf + l] = c * sr;
      bi[n * t.wf + l] = c * si;
    }
  }
  for (int k = 0; k < t.h; ++k) {
    for (int l = 0; l < t.wf; ++l) {
      double sr = 0.0, si = 0.0;
      for (int n = 0; n < t.h; ++n) {
        const double c = t.cos_h[k * t.h + n], s = t.sin_h[k * t.h + n];
        sr += br[n * t.wf + l] * c + bi[n * t.wf + l] * s;
        si += -br[n * t.wf + l] * s + bi[n * t.wf + l] * c;
      }
      gre[k * t.wf + l] += sr;
      gim[k * t.wf + l] += si;
    }
  }
}

}  // namespace detail

// [N, C, H, W] -> [N, 2C, H, W/2+1]
inline Tensor rfft2(const Tensor& x) {
  if (x.rank() != 4) throw std::invalid_argument("rfft2: expected NCHW");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto tables = std::make_shared<detail::DftTables>(h, w);
  const int wf = tables->wf;
  const std::size_t in_plane = static_cast<std::size_t>(h) * w, out_plane = static_cast<std::size_t>(h) * wf;
  std::vector<double> y(static_cast<std::size_t>(n) * 2 * c * out_plane);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      double* re = y.data() + (static_cast<std::size_t>(b) * 2 * c + ch) * out_plane;
      double* im = y.data() + (static_cast<std::size_t>(b) * 2 * c + c + ch) * out_plane;
      detail::rfft_plane(*tables, x.data().data() + (static_cast<std::size_t>(b) * c + ch) * in_plane, re, im);
    }
  }
  return detail::make_result({n, 2 * c, h, wf}, std::move(y), {x}, [x, tables, n, c, in_plane, out_plane](Node& self) {
    auto& gx = x.node()->grad_buffer();
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        const double* gre = self.grad.data() + (static_cast<std::size_t>(b) * 2 * c + ch) * out_plane;
        const double* gim = self.grad.data() + (static_cast<std::size_t>(b) * 2 * c + c + ch) * out_plane;
        detail::rfft_plane_adjoint(*tables, gre, gim, gx.data() + (static_cast<std::size_t>(b) * c + ch) * in_plane);
      }
    }
  });
}

// [N, 2C, H, W/2+1] -> [N, C, H, W]
inline Tensor irfft2(const Tensor& y, int width) {
  if (y.rank() != 4 || y.dim(1) % 2) throw std::invalid_argument("irfft2: expected [N, 2C, H, Wf]");
  const int n = y.dim(0), c = y.dim(1) / 2, h = y.dim(2);
  auto tables = std::make_shared<detail::DftTables>(h, width);
  if (tables->wf != y.dim(3)) throw std::invalid_argument("irfft2: width does not match half spectrum");
  const std::size_t out_plane = static_cast<std::size_t>(h) * width, in_plane = static_cast<std::size_t>(h) * tables->wf;
  std::vector<double> x(static_cast<std::size_t>(n) * c * out_plane);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const double* re = y.data().data() + (static_cast<std::size_t>(b) * 2 * c + ch) * in_plane;
      const double* im = y.data().data() + (static_cast<std::size_t>(b) * 2 * c + c + ch) * in_plane;
      detail::irfft_plane(*tables, re, im, x.data() + (static_cast<std::size_t>(b) * c + ch) * out_plane);
    }
  }
  return detail::make_result({n, c, h, width}, std::move(x), {y}, [y, tables, n, c, in_plane, out_plane](Node& self) {
    auto& gy = y.node()->grad_buffer();
    for (int b = 0; b < n; ++b) {
      for (int ch = 0; ch < c; ++ch) {
        double* gre = gy.data() + (static_cast<std::size_t>(b) * 2 * c + ch) * in_plane;
        double* gim = gy.data() + (static_cast<std::size_t>(b) * 2 * c + c + ch) * in_plane;
        detail::irfft_plane_adjoint(*tables, self.grad.data() + (static_cast<std::size_t>(b) * c + ch) * out_plane, gre, gim);
      }
    }
  });
}

}  // namespace warpfill
