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

// Superpixel quality against ground truth.
//
//   ASA = sum_i max_j |s_i n g_j| / #pixels
//   BR  = TP / (TP + FN), a ground-truth boundary pixel counting as a true
//         positive when a superpixel boundary pixel lies in the
//         (2 eps + 1) x (2 eps + 1) window centred on it.
//
// A pixel is a boundary pixel when any 4-neighbour carries another label.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rimseg/label_map.hpp"

namespace rimseg {

inline constexpr int kDefaultBoundaryTolerance = 1;

struct BoundaryMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> mask;  // 1 marks a boundary pixel

  BoundaryMask() = default;
  BoundaryMask(std::size_t w, std::size_t h) : width(w), height(h), mask(w * h, 0) {}

  bool at(std::size_t row, std::size_t col) const { return mask[row * width + col] != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
  friend bool operator==(const BoundaryMask&, const BoundaryMask&) = default;
};

inline double asa(const LabelMap& s, const LabelMap& g) {
  require_same_dimensions(s, g, "asa");
  if (s.size() == 0) throw std::invalid_argument("asa: empty label maps");
  std::vector<std::uint64_t> pairs(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    pairs[i] = (static_cast<std::uint64_t>(s.labels[i]) << 32) | g.labels[i];
  }
  std::sort(pairs.begin(), pairs.end());
  // Runs of equal pairs are intersection sizes, grouped by superpixel.
  std::size_t achievable = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    const std::uint64_t superpixel = pairs[i] >> 32;
    std::size_t best = 0;
    while (i < pairs.size() && (pairs[i] >> 32) == superpixel) {
      std::size_t j = i;
      while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
      best = std::max(best, j - i);
      i = j;
    }
    achievable += best;
  }
  return static_cast<double>(achievable) / static_cast<double>(s.size());
}

inline BoundaryMask extract_boundary(const LabelMap& labels) {
  BoundaryMask out(labels.width, labels.height);
  for (std::size_t row = 0; row < labels.height; ++row) {
    for (std::size_t col = 0; col < labels.width; ++col) {
      const std::size_t i = row * labels.width + col;
      if (col + 1 < labels.width && labels.labels[i] != labels.labels[i + 1]) {
        out.mask[i] = out.mask[i + 1] = 1;
      }
      if (row + 1 < labels.height && labels.labels[i] != labels.labels[i + labels.width]) {
        out.mask[i] = out.mask[i + labels.width] = 1;
      }
    }
  }
  return out;
}

struct BoundaryRecallCounts {
  std::size_t true_positives = 0;
  std::size_t ground_truth = 0;  // TP + FN

  double recall() const {
    return ground_truth == 0 ? 1.0
                             : static_cast<double>(true_positives) / static_cast<double>(ground_truth);
  }
};

inline BoundaryRecallCounts br_counts(const BoundaryMask& bs, const BoundaryMask& bg, int epsilon) {
  if (bs.width != bg.width || bs.height != bg.height) {
    throw std::invalid_argument("br: boundary masks differ in size");
  }
  if (epsilon < 0) throw std::invalid_argument("br: epsilon must be non-negative");
  const std::size_t w = bs.width, h = bs.height;
  // Summed-area table of the predicted mask, (h + 1) x (w + 1).
  std::vector<std::size_t> sat((h + 1) * (w + 1), 0);
  for (std::size_t row = 0; row < h; ++row) {
    std::size_t run = 0;
    for (std::size_t col = 0; col < w; ++col) {
      run += bs.mask[row * w + col];
      sat[(row + 1) * (w + 1) + col + 1] = sat[row * (w + 1) + col + 1] + run;
    }
  }
  const auto e = static_cast<std::size_t>(epsilon);
  BoundaryRecallCounts counts;
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      if (!bg.mask[row * w + col]) continue;
      ++counts.ground_truth;
      const std::size_t r0 = row >= e ? row - e : 0, r1 = std::min(h, row + e + 1);
      const std::size_t c0 = col >= e ? col - e : 0, c1 = std::min(w, col + e + 1);
      const std::size_t hits = sat[r1 * (w + 1) + c1] - sat[r0 * (w + 1) + c1] -
                               sat[r1 * (w + 1) + c0] + sat[r0 * (w + 1) + c0];
      if (hits > 0) ++counts.true_positives;
    }
  }
  return counts;
}

inline double br(const BoundaryMask& bs, const BoundaryMask& bg,
                 int epsilon = kDefaultBoundaryTolerance) {
  return br_counts(bs, bg, epsilon).recall();
}

struct PairMetrics {
  double asa = 0.0;
  double br = 0.0;
};

struct MetricsReport {
  double asa = 0.0;
  double br = 0.0;
  std::size_t n_superpixels = 0;
  std::vector<PairMetrics> per_ground_truth;
};

// Averages ASA and BR over several annotations of the same image.
inline MetricsReport evaluate(const LabelMap& s, const std::vector<LabelMap>& gts,
                              int epsilon = kDefaultBoundaryTolerance) {
  if (gts.empty()) throw std::invalid_argument("evaluate: no ground truth given");
  for (const auto& g : gts) require_same_dimensions(s, g, "evaluate");
  MetricsReport report;
  report.n_superpixels = count_superpixels(s);
  const BoundaryMask bs = extract_boundary(s);
  for (const auto& g : gts) {
    PairMetrics m{asa(s, g), br(bs, extract_boundary(g), epsilon)};
    report.asa += m.asa;
    report.br += m.br;
    report.per_ground_truth.push_back(m);
  }
  report.asa /= static_cast<double>(gts.size());
  report.br /= static_cast<double>(gts.size());
  return report;
}

}  // namespace rimseg
