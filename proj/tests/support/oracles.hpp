// Copyright 2026 The rimseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Slow, obviously-correct reference implementations used only by tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "rimseg/label_map.hpp"
#include "rimseg/objective.hpp"
#include "rimseg/ops.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg::testing {

// ---------------------------------------------------------------- metrics

// Enumerates every (superpixel, segment) label pair and counts overlaps
// pixel by pixel.
inline double brute_asa(const LabelMap& s, const LabelMap& g) {
  const std::set<Label> sl(s.labels.begin(), s.labels.end());
  const std::set<Label> gl(g.labels.begin(), g.labels.end());
  std::size_t total = 0;
  for (Label a : sl) {
    std::size_t best = 0;
    for (Label b : gl) {
      std::size_t overlap = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.labels[i] == a && g.labels[i] == b) ++overlap;
      }
      best = std::max(best, overlap);
    }
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(s.size());
}

// A pixel is on a boundary when any 4-neighbour carries another label.
inline std::vector<std::vector<bool>> brute_boundary(const LabelMap& m) {
  std::vector<std::vector<bool>> b(m.height, std::vector<bool>(m.width, false));
  const int h = static_cast<int>(m.height), w = static_cast<int>(m.width);
  const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
        if (m.at(rr, cc) != m.at(r, c)) b[r][c] = true;
      }
    }
  }
  return b;
}

// (matched ground-truth boundary pixels, all ground-truth boundary pixels)
inline std::pair<std::size_t, std::size_t> brute_br(const LabelMap& s, const LabelMap& g, int eps) {
  const auto bs = brute_boundary(s);
  const auto bg = brute_boundary(g);
  const int h = static_cast<int>(g.height), w = static_cast<int>(g.width);
  std::size_t tp = 0, all = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!bg[r][c]) continue;
      ++all;
      bool hit = false;
      for (int dr = -eps; dr <= eps && !hit; ++dr) {
        for (int dc = -eps; dc <= eps && !hit; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr >= 0 && cc >= 0 && rr < h && cc < w && bs[rr][cc]) hit = true;
        }
      }
      if (hit) ++tp;
    }
  }
  return {tp, all};
}

inline LabelMap random_labels(std::mt19937_64& rng, std::size_t w, std::size_t h, Label k) {
  std::uniform_int_distribution<Label> d(0, k - 1);
  LabelMap m(w, h);
  for (auto& v : m.labels) v = d(rng);
  return m;
}

// Random map made of a few axis-aligned blocks, so boundaries are sparse.
inline LabelMap random_blocky_labels(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  LabelMap m(w, h);
  std::uniform_int_distribution<int> nblocks(1, 5);
  const int n = nblocks(rng);
  for (int b = 0; b < n; ++b) {
    std::uniform_int_distribution<std::size_t> rx(0, w - 1), ry(0, h - 1);
    std::size_t x0 = rx(rng), x1 = rx(rng), y0 = ry(rng), y1 = ry(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (std::size_t r = y0; r <= y1; ++r) {
      for (std::size_t c = x0; c <= x1; ++c) m.at(r, c) = static_cast<Label>(b + 1);
    }
  }
  return m;
}

// ------------------------------------------------------------- components

inline std::size_t brute_components(const LabelMap& m) {
  std::vector<bool> seen(m.size(), false);
  std::size_t n = 0;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (seen[start]) continue;
    ++n;
    std::vector<std::size_t> stack = {start};
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t r = i / m.width, c = i % m.width;
      auto visit = [&](std::size_t j) {
        if (!seen[j] && m.labels[j] == m.labels[i]) {
          seen[j] = true;
          stack.push_back(j);
        }
      };
      if (c > 0) visit(i - 1);
      if (c + 1 < m.width) visit(i + 1);
      if (r > 0) visit(i - m.width);
      if (r + 1 < m.height) visit(i + m.width);
    }
  }
  return n;
}

// ------------------------------------------------------------------ losses

// Random H x W x N soft assignment (rows sum to 1, strictly positive).
template <typename T>
Tensor<T> random_assignment(std::mt19937_64& rng, std::size_t h, std::size_t w, std::size_t n,
                            double spread = 3.0) {
  std::normal_distribution<double> d(0.0, spread);
  std::vector<T> v(h * w * n);
  for (std::size_t i = 0; i < h * w; ++i) {
    double mx = -1e300;
    std::vector<double> row(n);
    for (auto& x : row) {
      x = d(rng);
      mx = std::max(mx, x);
    }
    double s = 0.0;
    for (auto& x : row) s += (x = std::exp(x - mx));
    for (std::size_t k = 0; k < n; ++k) v[i * n + k] = static_cast<T>(row[k] / s);
  }
  return Tensor<T>({h, w, n}, std::move(v));
}

inline double scalar_clustering_loss(const Tensor<double>& p, double lambda) {
  const std::size_t n = p.shape().back(), pixels = p.size() / n;
  auto v = p.data();
  double first = 0.0;
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double x = v[i * n + k];
      first -= x * std::log(std::max(x, kLogFloor));
      m[k] += x;
    }
  }
  double second = 0.0;
  for (double mk : m) {
    mk /= static_cast<double>(pixels);
    second += mk * std::log(std::max(mk, kLogFloor));
  }
  return first / static_cast<double>(pixels) + lambda * second;
}

inline double scalar_smoothness_loss(const Tensor<double>& p, const EdgeWeights<double>& wts) {
  const std::size_t h = p.dim(0), w = p.dim(1), n = p.dim(2);
  auto v = p.data();
  double total = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      double dx = 0.0, dy = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (c + 1 < w) dx += std::abs(v[(i + 1) * n + k] - v[i * n + k]);
        if (r + 1 < h) dy += std::abs(v[(i + w) * n + k] - v[i * n + k]);
      }
      total += dx * wts.wx.data()[i] + dy * wts.wy.data()[i];
    }
  }
  return total / static_cast<double>(h * w);
}

inline double scalar_recons_loss(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// The clustering and smoothness losses written as chains of elementary
// tape ops; these provide an independent gradient path.
template <typename T>
Tensor<T> composed_clustering_loss(const Tensor<T>& p, double lambda) {
  const T pixels = static_cast<T>(p.size() / p.shape().back());
  const Tensor<T> first = scalar_mul(sum_all(mul(p, log_guarded(p))), T(-1) / pixels);
  const Tensor<T> m = spatial_mean(p);
  const Tensor<T> second = sum_all(mul(m, log_guarded(m)));
  return add(first, scalar_mul(second, static_cast<T>(lambda)));
}

template <typename T>
Tensor<T> composed_smoothness_loss(const Tensor<T>& p, const EdgeWeights<T>& wts) {
  const T pixels = static_cast<T>(p.dim(0) * p.dim(1));
  const Tensor<T> sx = mul(sum_channels(abs(diff_x(p))), wts.wx);
  const Tensor<T> sy = mul(sum_channels(abs(diff_y(p))), wts.wy);
  return scalar_mul(add(sum_all(sx), sum_all(sy)), T(1) / pixels);
}

// ------------------------------------------------------------ convolution

// Direct 6-loop same-padded convolution, weights k x k x Cin x Cout.
inline std::vector<double> direct_conv(const std::vector<double>& x, std::size_t h, std::size_t w,
                                       std::size_t cin, const std::vector<double>& wt,
                                       const std::vector<double>& bias, std::size_t cout,
                                       std::size_t k) {
  std::vector<double> y(h * w * cout);
  const long pad = static_cast<long>(k / 2);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = bias[o];
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const long rr = static_cast<long>(r + i) - pad, cc = static_cast<long>(c + j) - pad;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(h) || cc >= static_cast<long>(w)) {
              continue;
            }
            for (std::size_t q = 0; q < cin; ++q) {
              acc += x[(rr * w + cc) * cin + q] * wt[((i * k + j) * cin + q) * cout + o];
            }
          }
        }
        y[(r * w + c) * cout + o] = acc;
      }
    }
  }
  return y;
}

}  // namespace rimseg::testing
