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

// PNG (via libpng) and binary/ASCII PPM reading, 8-bit PNG writing.
//
// PNG inputs of any colour type are expanded to 8- or 16-bit RGB: palettes
// are expanded, grayscale is replicated to three channels and alpha is
// dropped. Values are scaled to [0, 1] by the format maximum.

#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rimseg/image.hpp"

namespace rimseg {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw FormatError(path.string() + ": cannot open for " +
                      (mode[0] == 'r' ? "reading" : "writing"));
  }
  return f;
}

[[noreturn]] inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what != nullptr) *what = msg;
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

// Decoded PNG samples, row-major, `channels` interleaved samples per pixel.
struct PngRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 0;
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;
};

// Reads any PNG. With `to_rgb`, output is 3-channel; otherwise grayscale
// inputs stay single-channel (used for label maps).
inline PngRaster read_png(const std::filesystem::path& path, bool to_rgb) {
  FilePtr file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }
  std::string failure;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &failure, png_error_handler, png_warning_handler);
  if (png == nullptr) throw FormatError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("libpng: out of memory");
  }

  PngRaster raster;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  bool ok = false;
  if (setjmp(png_jmpbuf(png)) == 0) {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if ((color & PNG_COLOR_MASK_COLOR) == 0 && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if ((color & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
    if (to_rgb && (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)) {
      png_set_gray_to_rgb(png);
    }
    if (depth == 16) png_set_swap(png);  // little-endian sample pairs
    png_read_update_info(png, info);

    raster.width = png_get_image_width(png, info);
    raster.height = png_get_image_height(png, info);
    raster.channels = png_get_channels(png, info);
    raster.bit_depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * raster.height);
    rows.resize(raster.height);
    for (std::size_t r = 0; r < raster.height; ++r) rows[r] = buffer.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    ok = true;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw FormatError(path.string() + ": invalid PNG (" + failure + ")");

  const std::size_t count = raster.width * raster.height * static_cast<std::size_t>(raster.channels);
  raster.samples.resize(count);
  if (raster.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      raster.samples[i] = static_cast<std::uint16_t>(buffer[2 * i] | (buffer[2 * i + 1] << 8));
    }
  } else {
    std::copy(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(count),
              raster.samples.begin());
  }
  return raster;
}

// Writes 8- or 16-bit samples with the given channel count (1 or 3).
inline void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                      int channels, int bit_depth, const std::vector<std::uint16_t>& samples) {
  if (width == 0 || height == 0) throw FormatError(path.string() + ": cannot write an empty image");
  FilePtr file = open_file(path, "wb");
  std::string failure;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &failure, png_error_handler,
                                            png_warning_handler);
  if (png == nullptr) throw FormatError("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("libpng: out of memory");
  }
  const std::size_t bytes = bit_depth == 16 ? 2 : 1;
  const std::size_t rowbytes = width * static_cast<std::size_t>(channels) * bytes;
  std::vector<png_byte> buffer(rowbytes * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (bytes == 2) {
      buffer[2 * i] = static_cast<png_byte>(samples[i] >> 8);
      buffer[2 * i + 1] = static_cast<png_byte>(samples[i] & 0xff);
    } else {
      buffer[i] = static_cast<png_byte>(samples[i]);
    }
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t r = 0; r < height; ++r) rows[r] = buffer.data() + r * rowbytes;

  bool ok = false;
  if (setjmp(png_jmpbuf(png)) == 0) {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    ok = true;
  }
  png_destroy_write_struct(&png, &info);
  if (!ok) throw FormatError(path.string() + ": PNG write failed (" + failure + ")");
  if (std::fflush(file.get()) != 0) throw FormatError(path.string() + ": write failed");
}

// Next whitespace-delimited PPM header token, skipping '#' comments.
inline std::string ppm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

inline std::size_t ppm_number(std::istream& in, const std::filesystem::path& path) {
  const std::string token = ppm_token(in);
  if (token.empty() || !std::all_of(token.begin(), token.end(), ::isdigit)) {
    throw FormatError(path.string() + ": malformed PPM header");
  }
  return std::stoul(token);
}

inline RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  const std::string magic = ppm_token(in);
  if (magic != "P6" && magic != "P3") throw FormatError(path.string() + ": not a P3/P6 PPM file");
  const std::size_t w = ppm_number(in, path), h = ppm_number(in, path);
  const std::size_t maxval = ppm_number(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw FormatError(path.string() + ": unsupported PPM dimensions or maxval");
  }
  RgbImage img(w, h);
  const std::size_t count = w * h * 3;
  const float scale = 1.0f / static_cast<float>(maxval);
  if (magic == "P3") {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t v = ppm_number(in, path);
      if (v > maxval) throw FormatError(path.string() + ": sample exceeds maxval");
      img.data[i] = static_cast<float>(v) * scale;
    }
    return img;
  }
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw FormatError(path.string() + ": truncated PPM pixel data");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t v = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    img.data[i] = static_cast<float>(std::min(v, maxval)) * scale;
  }
  return img;
}

inline std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace detail

inline bool is_supported_image(const std::filesystem::path& path) {
  const std::string ext = detail::lower_extension(path);
  return ext == ".png" || ext == ".ppm";
}

inline RgbImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FormatError(path.string() + ": no such file");
  if (detail::lower_extension(path) == ".ppm") return detail::read_ppm(path);
  const detail::PngRaster raster = detail::read_png(path, true);
  if (raster.channels != 3) throw FormatError(path.string() + ": unsupported PNG channel layout");
  RgbImage img(raster.width, raster.height);
  const float scale = raster.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = static_cast<float>(raster.samples[i]) * scale;
  }
  return img;
}

// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
inline void save_image(const std::filesystem::path& path, const RgbImage& img) {
  std::vector<std::uint16_t> samples(img.data.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  detail::write_png(path, img.width, img.height, 3, 8, samples);
}

}  // namespace rimseg
