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

// SLIC superpixels (Achanta et al.): k-means in CIELAB + image plane with
// the search for each centre restricted to a 2S x 2S window, where
// S = sqrt(HW / k), and distance
//
//   D^2 = d_lab^2 + (m / S)^2 d_xy^2.
//
// Optional post-processing merges every 4-connected fragment smaller than
// S^2 / 4 pixels into its largest neighbour and gives each remaining
// fragment its own label.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "rimseg/image.hpp"
#include "rimseg/label_map.hpp"

namespace rimseg {

struct SlicConfig {
  std::size_t k = 100;
  double compactness = 10.0;
  std::size_t max_iters = 10;
  bool enforce_connectivity = true;

  void validate() const {
    if (k < 2) throw std::invalid_argument("SlicConfig: k must be at least 2");
    if (!(compactness > 0.0)) throw std::invalid_argument("SlicConfig: compactness must be positive");
    if (max_iters < 1) throw std::invalid_argument("SlicConfig: max_iters must be positive");
  }
};

// sRGB in [0, 1] to CIELAB, D65 reference white.
inline std::array<double, 3> srgb_to_lab(double r, double g, double b) {
  auto linear = [](double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
  };
  const double rl = linear(r), gl = linear(g), bl = linear(b);
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  auto f = [](double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3 * delta * delta) + 4.0 / 29.0;
  };
  const double fx = f(x / 0.95047), fy = f(y / 1.0), fz = f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

namespace detail {

struct SlicCenter {
  double l, a, b, x, y;
};

// Grid of nx * ny <= k seeds, as square as the aspect ratio allows.
inline std::vector<SlicCenter> slic_grid_seeds(std::size_t w, std::size_t h, std::size_t k,
                                               double step) {
  auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(w / step)));
  auto ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(h / step)));
  nx = std::min(nx, w);
  ny = std::min(ny, h);
  while (nx * ny > k) {
    if (static_cast<double>(w) / nx < static_cast<double>(h) / ny) {
      --nx;
    } else {
      --ny;
    }
  }
  std::vector<SlicCenter> seeds;
  seeds.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      seeds.push_back({0, 0, 0, (i + 0.5) * static_cast<double>(w) / nx,
                       (j + 0.5) * static_cast<double>(h) / ny});
    }
  }
  return seeds;
}

// Merges small 4-connected fragments into their largest neighbour and
// labels the surviving fragments 0..K-1 in raster order.
inline LabelMap merge_small_fragments(const LabelMap& labels, std::size_t min_size) {
  std::vector<std::uint32_t> comp;
  const std::size_t n = label_components(labels, comp);
  std::vector<std::size_t> size(n, 0);
  for (auto c : comp) ++size[c];

  std::vector<std::set<std::uint32_t>> adjacent(n);
  for (std::size_t r = 0; r < labels.height; ++r) {
    for (std::size_t c = 0; c < labels.width; ++c) {
      const std::size_t i = r * labels.width + c;
      auto link = [&](std::size_t j) {
        if (comp[i] != comp[j]) {
          adjacent[comp[i]].insert(comp[j]);
          adjacent[comp[j]].insert(comp[i]);
        }
      };
      if (c + 1 < labels.width) link(i + 1);
      if (r + 1 < labels.height) link(i + labels.width);
    }
  }

  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return size[a] < size[b]; });
  for (std::uint32_t c : order) {
    const std::uint32_t root = find(c);
    if (size[root] >= min_size) continue;
    std::uint32_t best = root;
    for (std::uint32_t nb : adjacent[root]) {
      const std::uint32_t r = find(nb);
      if (r == root) continue;
      if (best == root || size[r] > size[best] || (size[r] == size[best] && r < best)) best = r;
    }
    if (best == root) continue;  // the only fragment
    parent[root] = best;
    size[best] += size[root];
    adjacent[best].insert(adjacent[root].begin(), adjacent[root].end());
    adjacent[root].clear();
  }

  LabelMap out(labels.width, labels.height);
  for (std::size_t i = 0; i < labels.size(); ++i) out.labels[i] = find(comp[i]);
  return compact_labels(out);
}

}  // namespace detail

inline LabelMap slic(const RgbImage& image, const SlicConfig& cfg) {
  cfg.validate();
  if (image.empty()) throw std::invalid_argument("slic: empty image");
  const std::size_t w = image.width, h = image.height, pixels = w * h;
  if (cfg.k > pixels) {
    throw std::invalid_argument("slic: k = " + std::to_string(cfg.k) + " exceeds the " +
                                std::to_string(pixels) + " pixels of the image");
  }
  const double step = std::sqrt(static_cast<double>(pixels) / static_cast<double>(cfg.k));

  std::vector<std::array<double, 3>> lab(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    lab[i] = srgb_to_lab(image.data[i * 3], image.data[i * 3 + 1], image.data[i * 3 + 2]);
  }

  std::vector<detail::SlicCenter> centers = detail::slic_grid_seeds(w, h, cfg.k, step);
  // Move each seed to the lowest-gradient pixel of its 3x3 neighbourhood.
  auto gradient = [&](std::size_t x, std::size_t y) {
    if (x == 0 || y == 0 || x + 1 >= w || y + 1 >= h) return std::numeric_limits<double>::infinity();
    double g = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double dx = lab[y * w + x + 1][c] - lab[y * w + x - 1][c];
      const double dy = lab[(y + 1) * w + x][c] - lab[(y - 1) * w + x][c];
      g += dx * dx + dy * dy;
    }
    return g;
  };
  for (auto& s : centers) {
    const auto cx = static_cast<std::size_t>(s.x), cy = static_cast<std::size_t>(s.y);
    std::size_t bx = cx, by = cy;
    double best = gradient(cx, cy);
    for (std::size_t y = cy > 0 ? cy - 1 : 0; y <= std::min(h - 1, cy + 1); ++y) {
      for (std::size_t x = cx > 0 ? cx - 1 : 0; x <= std::min(w - 1, cx + 1); ++x) {
        const double g = gradient(x, y);
        if (g < best) {
          best = g;
          bx = x;
          by = y;
        }
      }
    }
    if (bx != cx || by != cy) {
      s.x = static_cast<double>(bx) + 0.5;
      s.y = static_cast<double>(by) + 0.5;
    }
    const auto& p = lab[static_cast<std::size_t>(s.y) * w + static_cast<std::size_t>(s.x)];
    s.l = p[0];
    s.a = p[1];
    s.b = p[2];
  }

  const double spatial = (cfg.compactness / step) * (cfg.compactness / step);
  std::vector<Label> assign(pixels, 0);
  std::vector<double> dist(pixels);
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& c = centers[k];
      const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(c.x - step)));
      const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(c.y - step)));
      const auto x1 = std::min(w, static_cast<std::size_t>(std::ceil(c.x + step)));
      const auto y1 = std::min(h, static_cast<std::size_t>(std::ceil(c.y + step)));
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
          const std::size_t i = y * w + x;
          const double dl = lab[i][0] - c.l, da = lab[i][1] - c.a, db = lab[i][2] - c.b;
          const double px = x + 0.5 - c.x, py = y + 0.5 - c.y;
          const double d = dl * dl + da * da + db * db + spatial * (px * px + py * py);
          if (d < dist[i]) {
            dist[i] = d;
            assign[i] = static_cast<Label>(k);
          }
        }
      }
    }
    std::vector<std::array<double, 6>> acc(centers.size(), {0, 0, 0, 0, 0, 0});
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        auto& a = acc[assign[i]];
        for (std::size_t c = 0; c < 3; ++c) a[c] += lab[i][c];
        a[3] += static_cast<double>(x) + 0.5;
        a[4] += static_cast<double>(y) + 0.5;
        a[5] += 1;
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& a = acc[k];
      if (a[5] == 0) continue;
      centers[k] = {a[0] / a[5], a[1] / a[5], a[2] / a[5], a[3] / a[5], a[4] / a[5]};
    }
  }

  LabelMap labels(w, h, std::move(assign));
  if (!cfg.enforce_connectivity) return labels;
  const auto min_size = std::max<std::size_t>(1, static_cast<std::size_t>(step * step / 4.0));
  return detail::merge_small_fragments(labels, min_size);
}

}  // namespace rimseg
