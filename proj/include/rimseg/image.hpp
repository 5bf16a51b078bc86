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
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rimseg/tensor.hpp"

namespace rimseg {

// Interleaved RGB with values in [0, 1], row-major.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, float fill = 0.0f)
      : width(w), height(h), data(w * h * 3, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  std::size_t pixels() const { return width * height; }
  float at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data[(row * width + col) * 3 + ch];
  }
  float& at(std::size_t row, std::size_t col, std::size_t ch) {
    return data[(row * width + col) * 3 + ch];
  }

  Tensor<float> to_tensor() const { return Tensor<float>({height, width, 3}, data); }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Area-averaging resize: each output pixel is the coverage-weighted mean of
// the input pixels under it.
inline RgbImage resize_area(const RgbImage& src, std::size_t out_w, std::size_t out_h) {
  if (src.empty()) throw std::invalid_argument("resize_area: empty image");
  if (out_w == 0 || out_h == 0) throw std::invalid_argument("resize_area: empty target size");
  struct Span {
    std::size_t first;
    std::vector<double> weights;
  };
  auto spans = [](std::size_t n_in, std::size_t n_out) {
    std::vector<Span> out(n_out);
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double lo = static_cast<double>(o) * scale, hi = static_cast<double>(o + 1) * scale;
      const auto first = static_cast<std::size_t>(std::floor(lo));
      const auto last = std::min(n_in, static_cast<std::size_t>(std::ceil(hi)));
      out[o].first = first;
      for (std::size_t i = first; i < last; ++i) {
        const double cover =
            std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
        out[o].weights.push_back(std::max(0.0, cover) / scale);
      }
    }
    return out;
  };
  const auto xs = spans(src.width, out_w);
  const auto ys = spans(src.height, out_h);
  RgbImage out(out_w, out_h);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double acc[3] = {0, 0, 0};
      for (std::size_t a = 0; a < ys[oy].weights.size(); ++a) {
        for (std::size_t b = 0; b < xs[ox].weights.size(); ++b) {
          const double wgt = ys[oy].weights[a] * xs[ox].weights[b];
          for (std::size_t c = 0; c < 3; ++c) {
            acc[c] += wgt * src.at(ys[oy].first + a, xs[ox].first + b, c);
          }
        }
      }
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(oy, ox, c) = static_cast<float>(std::clamp(acc[c], 0.0, 1.0));
      }
    }
  }
  return out;
}

// Shrinks so that neither side exceeds max_side, keeping the aspect ratio.
inline RgbImage downscale_to_fit(const RgbImage& src, std::size_t max_side) {
  if (max_side == 0) throw std::invalid_argument("downscale_to_fit: max_side must be positive");
  const std::size_t longest = std::max(src.width, src.height);
  if (longest <= max_side) return src;
  const double s = static_cast<double>(max_side) / static_cast<double>(longest);
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.width * s)));
  const auto h = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(src.height * s)));
  return resize_area(src, w, h);
}

}  // namespace rimseg
