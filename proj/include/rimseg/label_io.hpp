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

// Label maps on disk: single-channel PNG (8- or 16-bit; written as 16-bit)
// or CSV with one image row per line. Labels are stored as-is.

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "rimseg/image_io.hpp"
#include "rimseg/label_map.hpp"

namespace rimseg {

inline constexpr Label kMaxPngLabel = 65535;

namespace detail {

inline LabelMap read_label_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::vector<Label> labels;
  std::size_t width = 0, height = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t cols = 0;
    std::string_view rest(line);
    while (true) {
      const std::size_t comma = rest.find(',');
      std::string_view field = rest.substr(0, comma);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      std::uint64_t value = 0;
      const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || ec != std::errc() || end != field.data() + field.size() ||
          value > std::numeric_limits<Label>::max()) {
        throw FormatError(path.string() + ": line " + std::to_string(height + 1) +
                          ": invalid label '" + std::string(field) + "'");
      }
      labels.push_back(static_cast<Label>(value));
      ++cols;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (height == 0) width = cols;
    if (cols != width) {
      throw FormatError(path.string() + ": line " + std::to_string(height + 1) + " has " +
                        std::to_string(cols) + " labels, expected " + std::to_string(width));
    }
    ++height;
  }
  if (height == 0) throw FormatError(path.string() + ": empty label file");
  return LabelMap(width, height, std::move(labels));
}

inline void write_label_csv(const std::filesystem::path& path, const LabelMap& map) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) {
      if (c > 0) out << ',';
      out << map.at(r, c);
    }
    out << '\n';
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

}  // namespace detail

inline LabelMap load_labelmap(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FormatError(path.string() + ": no such file");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".csv") return detail::read_label_csv(path);
  if (ext != ".png") throw FormatError(path.string() + ": label maps must be .png or .csv");
  const detail::PngRaster raster = detail::read_png(path, false);
  if (raster.channels != 1) {
    throw FormatError(path.string() + ": label PNG must be single-channel grayscale");
  }
  return LabelMap(raster.width, raster.height,
                  std::vector<Label>(raster.samples.begin(), raster.samples.end()));
}

// PNG output is 16-bit grayscale and rejects labels above 65535; use CSV
// for larger identifiers.
inline void save_labelmap(const std::filesystem::path& path, const LabelMap& map) {
  if (map.size() == 0) throw FormatError(path.string() + ": cannot save an empty label map");
  const std::string ext = detail::lower_extension(path);
  if (ext == ".csv") {
    detail::write_label_csv(path, map);
    return;
  }
  if (ext != ".png") throw FormatError(path.string() + ": label maps must be .png or .csv");
  std::vector<std::uint16_t> samples(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map.labels[i] > kMaxPngLabel) {
      throw FormatError(path.string() + ": label " + std::to_string(map.labels[i]) +
                        " does not fit a 16-bit PNG");
    }
    samples[i] = static_cast<std::uint16_t>(map.labels[i]);
  }
  detail::write_png(path, map.width, map.height, 1, 16, samples);
}

}  // namespace rimseg
