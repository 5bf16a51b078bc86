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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "rimseg/image.hpp"
#include "rimseg/image_io.hpp"
#include "rimseg/label_io.hpp"
#include "rimseg/normalize.hpp"

namespace fs = std::filesystem;

namespace rimseg {
namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rimseg_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  fs::path dir_;
};

using ImageIo = TempDir;
using LabelIo = TempDir;

TEST_F(ImageIo, PngBytesScaleExactly) {
  const std::vector<std::uint16_t> bytes = {0, 51, 255, 10, 20, 30, 128, 64, 32, 1, 2, 254};
  detail::write_png(path("a.png"), 2, 2, 3, 8, bytes);
  const RgbImage img = load_image(path("a.png"));
  ASSERT_EQ(img.width, 2u);
  ASSERT_EQ(img.height, 2u);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    EXPECT_FLOAT_EQ(img.data[i], static_cast<float>(bytes[i]) / 255.0f);
  }
}

TEST_F(ImageIo, GrayscaleIsReplicated) {
  detail::write_png(path("g.png"), 3, 1, 1, 8, {0, 100, 255});
  const RgbImage img = load_image(path("g.png"));
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_FLOAT_EQ(img.at(0, 1, c), 100.0f / 255.0f);
    EXPECT_FLOAT_EQ(img.at(0, 2, c), 1.0f);
  }
}

TEST_F(ImageIo, SaveLoadRoundTrip) {
  RgbImage img(5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 256) / 255.0f;
  save_image(path("r.png"), img);
  const RgbImage back = load_image(path("r.png"));
  ASSERT_EQ(back.width, img.width);
  ASSERT_EQ(back.height, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_FLOAT_EQ(back.data[i], img.data[i]);
}

TEST_F(ImageIo, ReadsBinaryAndAsciiPpm) {
  write_text("a.ppm", "P3\n# comment\n2 1\n255\n255 0 0  0 0 255\n");
  const RgbImage a = load_image(path("a.ppm"));
  EXPECT_EQ(a.width, 2u);
  EXPECT_FLOAT_EQ(a.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(a.at(0, 1, 2), 1.0f);
  std::string bin = "P6\n1 2\n255\n";
  bin += std::string("\x10\x20\x30\x40\x50\x60", 6);
  write_text("b.ppm", bin);
  const RgbImage b = load_image(path("b.ppm"));
  EXPECT_EQ(b.height, 2u);
  EXPECT_FLOAT_EQ(b.at(1, 0, 2), 0x60 / 255.0f);
}

TEST_F(ImageIo, TruncatedAndBogusFilesRaiseFormatErrors) {
  RgbImage img(16, 16, 0.5f);
  save_image(path("full.png"), img);
  std::ifstream in(path("full.png"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  write_text("cut.png", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_image(path("cut.png")), FormatError);
  write_text("cut.ppm", "P6\n4 4\n255\nabc");
  EXPECT_THROW(load_image(path("cut.ppm")), FormatError);
  write_text("junk.png", "not a png at all");
  EXPECT_THROW(load_image(path("junk.png")), FormatError);
  EXPECT_THROW(load_image(path("missing.png")), FormatError);
}

TEST_F(LabelIo, CsvExample) {
  write_text("m.csv", "0,0\n1,1\n");
  const LabelMap m = load_labelmap(path("m.csv"));
  EXPECT_EQ(m, LabelMap(2, 2, {0, 0, 1, 1}));
}

TEST_F(LabelIo, CsvAcceptsLargeLabelsAndRoundTrips) {
  const LabelMap m(3, 2, {70000, 0, 5, 4000000000u, 1, 2});
  save_labelmap(path("m.csv"), m);
  EXPECT_EQ(load_labelmap(path("m.csv")), m);
  EXPECT_THROW(save_labelmap(path("m.png"), m), FormatError);
}

TEST_F(LabelIo, Png16RoundTripsBitExactly) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Label> d(0, kMaxPngLabel);
  LabelMap m(7, 5);
  for (auto& v : m.labels) v = d(rng);
  m.labels[0] = kMaxPngLabel;
  save_labelmap(path("m.png"), m);
  EXPECT_EQ(load_labelmap(path("m.png")), m);
}

TEST_F(LabelIo, RejectsMalformedInput) {
  write_text("ragged.csv", "0,1\n2\n");
  EXPECT_THROW(load_labelmap(path("ragged.csv")), FormatError);
  write_text("neg.csv", "0,-1\n");
  EXPECT_THROW(load_labelmap(path("neg.csv")), FormatError);
  write_text("word.csv", "0,x\n");
  EXPECT_THROW(load_labelmap(path("word.csv")), FormatError);
  save_image(path("rgb.png"), RgbImage(2, 2, 0.5f));
  EXPECT_THROW(load_labelmap(path("rgb.png")), FormatError);
  EXPECT_THROW(load_labelmap(path("m.txt")), FormatError);
}

TEST(Resize, AreaAverageAndFit) {
  RgbImage img(4, 2);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t k = 0; k < 3; ++k) {
      img.at(0, c, k) = static_cast<float>(c) / 8;
      img.at(1, c, k) = static_cast<float>(c + 4) / 8;
    }
  }
  const RgbImage half = resize_area(img, 2, 1);
  EXPECT_FLOAT_EQ(half.at(0, 0, 0), (0 + 1 + 4 + 5) / 32.0f);
  EXPECT_FLOAT_EQ(half.at(0, 1, 1), (2 + 3 + 6 + 7) / 32.0f);
  EXPECT_THROW(downscale_to_fit(img, 0), std::invalid_argument);
  EXPECT_EQ(downscale_to_fit(img, 8), img);
  const RgbImage fit = downscale_to_fit(img, 2);
  EXPECT_EQ(fit.width, 2u);
  EXPECT_EQ(fit.height, 1u);
}

// ----------------------------------------------------------- normalize --

void expect_standardized(const Tensor<float>& t) {
  const std::size_t c = t.dim(2), n = t.dim(0) * t.dim(1);
  for (std::size_t k = 0; k < c; ++k) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < n; ++i) m += t.data()[i * c + k];
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) v += std::pow(t.data()[i * c + k] - m, 2);
    EXPECT_LT(std::abs(m), 1e-5);
    EXPECT_LT(std::abs(std::sqrt(v / static_cast<double>(n)) - 1.0), 1e-4);
  }
}

TEST(Normalize, CoordinateExample) {
  const NormalizedInput in = normalize_inputs(RgbImage(3, 1, 0.2f));
  const double r = std::sqrt(1.5);
  EXPECT_NEAR(in.coords.data()[0], -r, 1e-6);
  EXPECT_NEAR(in.coords.data()[2], 0.0, 1e-6);
  EXPECT_NEAR(in.coords.data()[4], r, 1e-6);
  for (std::size_t i = 1; i < 6; i += 2) EXPECT_EQ(in.coords.data()[i], 0.0f);  // single row
  for (float v : in.image.values()) EXPECT_EQ(v, 0.0f);  // constant colour
  EXPECT_EQ(in.image_stats[0].stddev, 0.0);
}

TEST(Normalize, RandomImagesAreStandardized) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    RgbImage img(5 + trial, 9 + 2 * trial);
    for (auto& v : img.data) v = u(rng) * 0.3f + 0.1f * static_cast<float>(trial % 3);
    const NormalizedInput in = normalize_inputs(img);
    expect_standardized(in.image);
    expect_standardized(in.coords);
    EXPECT_EQ(in.image.shape(), (Shape{img.height, img.width, 3}));
  }
  EXPECT_THROW(normalize_inputs(RgbImage()), std::invalid_argument);
}

TEST(Normalize, IsIdempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0, 1);
  RgbImage img(12, 9);
  for (auto& v : img.data) v = u(rng);
  const NormalizedInput once = normalize_inputs(img);
  // Feed the standardized colours back through as raw values.
  RgbImage again(12, 9);
  again.data = once.image.values();
  const NormalizedInput twice = normalize_inputs(again);
  for (std::size_t i = 0; i < once.image.size(); ++i) {
    EXPECT_NEAR(twice.image.data()[i], once.image.data()[i], 1e-6);
  }
}

TEST(Normalize, DenormalizeInvertsStandardization) {
  RgbImage img(4, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 7) / 7.0f;
  const NormalizedInput in = normalize_inputs(img);
  const RgbImage back = denormalize_image(in.image, in.image_stats);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-6);
}

}  // namespace
}  // namespace rimseg
