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

// Elementwise, reduction and shape operators with reverse-mode rules.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "warpfill/core/tensor.hpp"

namespace warpfill {

namespace detail {

inline void accumulate(const Tensor& t, std::size_t i, double g) {
  if (t.requires_grad()) t.node()->grad_buffer()[i] += g;
}

// Either both operands share a shape, or one of them holds a single value.
inline Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                              " and " + shape_str(b.shape()));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DA da, DB db) {
  Shape shape = broadcast_shape(a, b, name);
  const std::size_t n = numel_of(shape);
  const bool sa = a.numel() == 1 && n != 1, sb = b.numel() == 1 && n != 1;
  std::vector<double> out(n);
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[sa ? 0 : i], bv[sb ? 0 : i]);
  return make_result(shape, std::move(out), {a, b}, [a, b, sa, sb, da, db](Node& self) {
    const auto& g = self.grad;
    const auto& av = a.data();
    const auto& bv = b.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = av[sa ? 0 : i], y = bv[sb ? 0 : i];
      if (a.requires_grad()) a.node()->grad_buffer()[sa ? 0 : i] += g[i] * da(x, y);
      if (b.requires_grad()) b.node()->grad_buffer()[sb ? 0 : i] += g[i] * db(x, y);
    }
  });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  const auto& av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  return make_result(a.shape(), std::move(out), {a}, [a, deriv](Node& self) {
    auto& ga = a.node()->grad_buffer();
    const auto& av = a.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * deriv(av[i], self.value[i]);
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

inline Tensor scale(const Tensor& a, double c) {
  return detail::unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(const Tensor& a, double c) {
  return detail::unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Tensor abs(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Tensor exp(const Tensor& a) {
  return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor sqrt(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus_scalar(double x) {
  return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

inline Tensor softplus(const Tensor& a) {
  return detail::unary(a, softplus_scalar, [](double x, double) { return sigmoid_scalar(x); });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(const Tensor& a, double slope = 0.2) {
  return detail::unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

inline Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return detail::make_result({1}, {s}, {a}, [a](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (double& g : ga) g += self.grad[0];
  });
}

inline Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  return scale(sum(a), inv);
}

// Reduces every axis except the leading one: [N, ...] -> [N].
inline Tensor mean_per_sample(const Tensor& a) {
  const int n = a.dim(0);
  const std::size_t per = a.numel() / static_cast<std::size_t>(n);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < per; ++j) out[i] += a.data()[i * per + j];
    out[i] /= static_cast<double>(per);
  }
  return detail::make_result({n}, std::move(out), {a}, [a, per](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double g = self.grad[i] / static_cast<double>(per);
      for (std::size_t j = 0; j < per; ++j) ga[i * per + j] += g;
    }
  });
}

inline Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel_of(shape) != a.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  return detail::make_result(shape, a.data(), {a}, [a](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

namespace detail {
// Splits a shape into (outer, axis extent, inner) around `axis`.
inline void axis_split(const Shape& s, int axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[i]);
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
}
}  // namespace detail

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  Shape shape = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(shape.size())) throw std::invalid_argument("concat: bad axis");
  int total = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != shape[i]) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(shape));
      }
    }
    total += s[axis];
  }
  shape[axis] = total;
  std::size_t outer, inner;
  detail::axis_split(shape, axis, outer, inner);
  std::vector<double> out(numel_of(shape));
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t len = static_cast<std::size_t>(p.shape()[axis]) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().begin() + o * len, len, out.begin() + o * total * inner + offset);
    }
    offset += len;
  }
  return detail::make_result(shape, std::move(out), parts, [parts, axis, outer, inner, total](Node& self) {
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p.shape()[axis]) * inner;
      if (p.requires_grad()) {
        auto& gp = p.node()->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t k = 0; k < len; ++k) gp[o * len + k] += self.grad[o * total * inner + offset + k];
        }
      }
      offset += len;
    }
  });
}

inline Tensor slice(const Tensor& a, int axis, int start, int length) {
  Shape shape = a.shape();
  if (start < 0 || length < 0 || start + length > shape.at(axis)) {
    throw std::invalid_argument("slice: range out of bounds for " + shape_str(shape));
  }
  const int extent = shape[axis];
  shape[axis] = length;
  std::size_t outer, inner;
  detail::axis_split(shape, axis, outer, inner);
  std::vector<double> out(numel_of(shape));
  const std::size_t len = static_cast<std::size_t>(length) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().begin() + o * extent * inner + start * inner, len, out.begin() + o * len);
  }
  return detail::make_result(shape, std::move(out), {a}, [a, outer, inner, len, extent, start](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t k = 0; k < len; ++k) ga[o * extent * inner + start * inner + k] += self.grad[o * len + k];
    }
  });
}

// Reverses the last axis (horizontal flip of NCHW images).
inline Tensor flip_last(const Tensor& a) {
  const std::size_t w = static_cast<std::size_t>(a.shape().back());
  const std::size_t rows = a.numel() / w;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < w; ++x) out[r * w + x] = a.data()[r * w + (w - 1 - x)];
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [a, w, rows](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t x = 0; x < w; ++x) ga[r * w + (w - 1 - x)] += self.grad[r * w + x];
    }
  });
}

// Broadcasts [N, C] across the spatial axes of an [N, C, H, W] map.
inline Tensor expand_spatial(const Tensor& a, int h, int w) {
  const int n = a.dim(0), c = a.dim(1);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(n) * c * hw);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n) * c; ++i) {
    std::fill_n(out.begin() + i * hw, hw, a.data()[i]);
  }
  return detail::make_result({n, c, h, w}, std::move(out), {a}, [a, hw](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < hw; ++k) s += self.grad[i * hw + k];
      ga[i] += s;
    }
  });
}

// Composite losses used throughout training.
inline Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }
inline Tensor mae(const Tensor& a, const Tensor& b) { return mean(abs(sub(a, b))); }

// Row-wise L2 normalisation of an [N, E] matrix.
inline Tensor normalize_rows(const Tensor& a, double eps = 1e-12) {
  const int n = a.dim(0);
  const std::size_t e = a.numel() / static_cast<std::size_t>(n);
  std::vector<double> out(a.numel()), norms(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < e; ++k) s += a.data()[i * e + k] * a.data()[i * e + k];
    norms[i] = std::sqrt(s + eps);
    for (std::size_t k = 0; k < e; ++k) out[i * e + k] = a.data()[i * e + k] / norms[i];
  }
  return detail::make_result(a.shape(), out, {a}, [a, n, e, norms](Node& self) {
    auto& ga = a.node()->grad_buffer();
    for (int i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < e; ++k) dot += self.grad[i * e + k] * self.value[i * e + k];
      for (std::size_t k = 0; k < e; ++k) {
        ga[i * e + k] += (self.grad[i * e + k] - self.value[i * e + k] * dot) / norms[i];
      }
    }
  });
}

// Per-row dot product of two [N, E] matrices -> [N].
inline Tensor row_dot(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("row_dot: shape mismatch");
  const int n = a.dim(0);
  const std::size_t e = a.numel() / static_cast<std::size_t>(n);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < e; ++k) out[i] += a.data()[i * e + k] * b.data()[i * e + k];
  }
  return detail::make_result({n}, std::move(out), {a, b}, [a, b, n, e](Node& self) {
    for (int i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < e; ++k) {
        detail::accumulate(a, i * e + k, self.grad[i] * b.data()[i * e + k]);
        detail::accumulate(b, i * e + k, self.grad[i] * a.data()[i * e + k]);
      }
    }
  });
}

}  // namespace warpfill
