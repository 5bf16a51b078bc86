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

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rimseg {

using Label = std::uint32_t;

// H x W segment identifiers, row-major. Used for superpixels and ground truth.
struct LabelMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Label> labels;

  LabelMap() = default;
  LabelMap(std::size_t w, std::size_t h, Label fill = 0) : width(w), height(h), labels(w * h, fill) {}
  LabelMap(std::size_t w, std::size_t h, std::vector<Label> values)
      : width(w), height(h), labels(std::move(values)) {
    if (labels.size() != w * h) {
      throw std::invalid_argument("LabelMap: " + std::to_string(labels.size()) +
                                  " labels for a " + std::to_string(w) + "x" + std::to_string(h) +
                                  " map");
    }
  }

  std::size_t size() const { return labels.size(); }
  Label at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }
  Label& at(std::size_t row, std::size_t col) { return labels[row * width + col]; }

  bool same_dimensions(const LabelMap& other) const {
    return width == other.width && height == other.height;
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

inline void require_same_dimensions(const LabelMap& a, const LabelMap& b, const char* what) {
  if (!a.same_dimensions(b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                                std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

inline std::size_t count_superpixels(const LabelMap& map) {
  std::vector<Label> sorted = map.labels;
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

// Renumbers labels to 0..K-1 in order of first appearance (raster order).
inline LabelMap compact_labels(const LabelMap& map) {
  LabelMap out(map.width, map.height);
  std::unordered_map<Label, Label> ids;
  for (std::size_t i = 0; i < map.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(map.labels[i], static_cast<Label>(ids.size()));
    out.labels[i] = it->second;
  }
  return out;
}

// Component id (0..K-1, raster order of discovery) of every pixel under
// 4-connectivity among equal labels. Returns K.
inline std::size_t label_components(const LabelMap& map, std::vector<std::uint32_t>& component) {
  constexpr std::uint32_t kUnset = UINT32_MAX;
  component.assign(map.size(), kUnset);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < map.size(); ++start) {
    if (component[start] != kUnset) continue;
    const Label label = map.labels[start];
    component[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t row = i / map.width, col = i % map.width;
      auto visit = [&](std::size_t j) {
        if (component[j] == kUnset && map.labels[j] == label) {
          component[j] = next;
          stack.push_back(j);
        }
      };
      if (col > 0) visit(i - 1);
      if (col + 1 < map.width) visit(i + 1);
      if (row > 0) visit(i - map.width);
      if (row + 1 < map.height) visit(i + map.width);
    }
    ++next;
  }
  return next;
}

inline std::size_t count_connected_components(const LabelMap& map) {
  std::vector<std::uint32_t> component;
  return label_components(map, component);
}

// Nearest-neighbour resampling: output pixel centres map back to the
// source pixel that contains them.
inline LabelMap resize_nearest(const LabelMap& map, std::size_t width, std::size_t height) {
  if (map.size() == 0 || width == 0 || height == 0) {
    throw std::invalid_argument("resize_nearest: empty label map or target size");
  }
  LabelMap out(width, height);
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t sr = std::min(map.height - 1, (2 * r + 1) * map.height / (2 * height));
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t sc = std::min(map.width - 1, (2 * c + 1) * map.width / (2 * width));
      out.at(r, c) = map.at(sr, sc);
    }
  }
  return out;
}

}  // namespace rimseg
