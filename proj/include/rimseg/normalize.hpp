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

// Network inputs: RGB plus (column, row) coordinate channels, each
// standardized to zero mean and unit population variance.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rimseg/image.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg {

struct ChannelStats {
  double mean = 0.0;
  double stddev = 0.0;  // 0 marks a constant channel, mapped to all zeros
};

struct NormalizedInput {
  Tensor<float> image;   // H x W x 3
  Tensor<float> coords;  // H x W x 2, (column, row)
  std::array<ChannelStats, 3> image_stats{};
  std::array<ChannelStats, 2> coord_stats{};
};

namespace detail {

// Standardizes channel `c` of an interleaved buffer in place.
inline ChannelStats standardize_channel(std::vector<double>& values, std::size_t channels,
                                        std::size_t c) {
  const std::size_t n = values.size() / channels;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += values[i * channels + c];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i * channels + c] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  // Relative guard: rounding noise on a constant channel is not signal.
  const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
  for (std::size_t i = 0; i < n; ++i) {
    double& v = values[i * channels + c];
    v = constant ? 0.0 : (v - mean) / sd;
  }
  return {mean, constant ? 0.0 : sd};
}

inline std::vector<float> to_float(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace detail

inline NormalizedInput normalize_inputs(const RgbImage& img) {
  if (img.empty()) throw std::invalid_argument("normalize_inputs: empty image");
  const std::size_t h = img.height, w = img.width;
  std::vector<double> rgb(img.data.begin(), img.data.end());
  std::vector<double> xy(h * w * 2);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      xy[(r * w + c) * 2] = static_cast<double>(c);
      xy[(r * w + c) * 2 + 1] = static_cast<double>(r);
    }
  }
  NormalizedInput out;
  for (std::size_t c = 0; c < 3; ++c) out.image_stats[c] = detail::standardize_channel(rgb, 3, c);
  for (std::size_t c = 0; c < 2; ++c) out.coord_stats[c] = detail::standardize_channel(xy, 2, c);
  out.image = Tensor<float>({h, w, 3}, detail::to_float(rgb));
  out.coords = Tensor<float>({h, w, 2}, detail::to_float(xy));
  return out;
}

// Maps a normalized H x W x 3 tensor (e.g. a reconstruction) back to [0, 1].
inline RgbImage denormalize_image(const Tensor<float>& t, const std::array<ChannelStats, 3>& stats) {
  if (t.rank() != 3 || t.dim(2) != 3) {
    throw ShapeError("denormalize_image: expected H x W x 3, got " + shape_string(t.shape()));
  }
  RgbImage img(t.dim(1), t.dim(0));
  auto v = t.data();
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double x = v[i * 3 + c] * stats[c].stddev + stats[c].mean;
      img.data[i * 3 + c] = static_cast<float>(std::clamp(x, 0.0, 1.0));
    }
  }
  return img;
}

}  // namespace rimseg
