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

#include <random>
#include <tuple>
#include <vector>

#include "rimseg/conv2d.hpp"
#include "rimseg/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace rimseg {
namespace {

using testing::check_gradients;
using testing::random_tensor;
using testing::weighted_sum;
using Td = Tensor<double>;

struct ConvShape {
  std::size_t h, w, cin, cout;
};

class ConvEquivalence : public ::testing::TestWithParam<ConvShape> {};

// Sizes include tile remainders (h, w not multiples of 4) and 1-pixel maps.
INSTANTIATE_TEST_SUITE_P(Shapes, ConvEquivalence,
                         ::testing::Values(ConvShape{1, 1, 1, 1}, ConvShape{2, 3, 2, 3},
                                           ConvShape{4, 4, 3, 5}, ConvShape{5, 7, 4, 2},
                                           ConvShape{9, 6, 5, 8}, ConvShape{13, 11, 3, 17},
                                           ConvShape{16, 16, 8, 4}));

TEST_P(ConvEquivalence, BothAlgorithmsMatchDirectConvolution) {
  const auto [h, w, cin, cout] = GetParam();
  std::mt19937_64 rng(h * 100 + w);
  Td x = random_tensor({h, w, cin}, rng);
  Td wt = random_tensor({3, 3, cin, cout}, rng);
  Td b = random_tensor({cout}, rng);
  const auto ref = testing::direct_conv(x.values(), h, w, cin, wt.values(), b.values(), cout, 3);
  for (auto algo : {ConvAlgorithm::im2col, ConvAlgorithm::winograd}) {
    const auto y = conv2d(x, wt, b, algo).values();
    ASSERT_EQ(y.size(), ref.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-10);
  }
}

TEST_P(ConvEquivalence, WinogradGradientsMatchIm2col) {
  const auto [h, w, cin, cout] = GetParam();
  std::mt19937_64 rng(h * 31 + w);
  Td x0 = random_tensor({h, w, cin}, rng);
  Td w0 = random_tensor({3, 3, cin, cout}, rng);
  Td b0 = random_tensor({cout}, rng);
  std::vector<std::vector<double>> grads[2];
  int slot = 0;
  for (auto algo : {ConvAlgorithm::im2col, ConvAlgorithm::winograd}) {
    for (auto act : {Activation::identity, Activation::relu}) {
      Td x = x0.detach(), wt = w0.detach(), b = b0.detach();
      for (Td* t : {&x, &wt, &b}) t->set_requires_grad(true);
      Tape<double> tape;
      Tape<double>::Scope scope(tape);
      tape.backward(weighted_sum(conv2d(x, wt, b, algo, act), 5));
      for (Td* t : {&x, &wt, &b}) grads[slot].emplace_back(t->grad().begin(), t->grad().end());
    }
    ++slot;
  }
  for (std::size_t k = 0; k < grads[0].size(); ++k) {
    for (std::size_t i = 0; i < grads[0][k].size(); ++i) {
      EXPECT_NEAR(grads[0][k][i], grads[1][k][i], 1e-10) << "tensor " << k << " index " << i;
    }
  }
}

TEST(Conv, LargerKernelUsesIm2col) {
  std::mt19937_64 rng(8);
  Td x = random_tensor({6, 5, 2}, rng);
  Td wt = random_tensor({5, 5, 2, 3}, rng);
  Td b = random_tensor({3}, rng);
  const auto ref = testing::direct_conv(x.values(), 6, 5, 2, wt.values(), b.values(), 3, 5);
  const auto y = conv2d(x, wt, b).values();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-10);
  EXPECT_THROW(conv2d(x, wt, b, ConvAlgorithm::winograd), ShapeError);
}

TEST(Conv, FusedReluEqualsSeparateRelu) {
  std::mt19937_64 rng(12);
  Td x = random_tensor({7, 9, 3}, rng);
  Td wt = random_tensor({3, 3, 3, 6}, rng);
  Td b = random_tensor({6}, rng);
  EXPECT_EQ(conv2d(x, wt, b, ConvAlgorithm::winograd, Activation::relu).values(),
            relu(conv2d(x, wt, b, ConvAlgorithm::winograd)).values());
}

TEST(Conv, RejectsBadShapes) {
  Td x = Td::zeros({4, 4, 3});
  EXPECT_THROW(conv2d(x, Td::zeros({3, 3, 2, 4}), Td::zeros({4})), ShapeError);
  EXPECT_THROW(conv2d(x, Td::zeros({2, 2, 3, 4}), Td::zeros({4})), ShapeError);
  EXPECT_THROW(conv2d(x, Td::zeros({3, 3, 3, 4}), Td::zeros({3})), ShapeError);
  EXPECT_THROW(conv2d(Td::zeros({4, 4}), Td::zeros({3, 3, 3, 4}), Td::zeros({4})), ShapeError);
}

TEST(Conv, FloatWinogradTracksDoubleReference) {
  std::mt19937_64 rng(21);
  Td x = random_tensor({32, 32, 16}, rng);
  Td wt = random_tensor({3, 3, 16, 24}, rng, -0.2, 0.2);
  Td b = random_tensor({24}, rng);
  const auto ref = conv2d(x, wt, b, ConvAlgorithm::im2col).values();
  auto to_f = [](const Td& t) {
    return Tensor<float>(t.shape(), std::vector<float>(t.data().begin(), t.data().end()));
  };
  const auto y = conv2d(to_f(x), to_f(wt), to_f(b), ConvAlgorithm::winograd).values();
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-4 * (1 + std::abs(ref[i])));
}

class ConvGradient
    : public ::testing::TestWithParam<std::tuple<ConvAlgorithm, Activation>> {};

INSTANTIATE_TEST_SUITE_P(
    Paths, ConvGradient,
    ::testing::Combine(::testing::Values(ConvAlgorithm::im2col, ConvAlgorithm::winograd),
                       ::testing::Values(Activation::identity, Activation::relu)));

TEST_P(ConvGradient, MatchesCentralDifferences) {
  const auto [algo, act] = GetParam();
  std::mt19937_64 rng(77);
  Td x = random_tensor({6, 5, 3}, rng);
  Td wt = random_tensor({3, 3, 3, 4}, rng);
  Td b = random_tensor({4}, rng);
  // A perturbation of 1e-5 crossing a ReLU kink would show up here as a
  // large error; with this seed no pre-activation lies that close to 0.
  const auto report = check_gradients(
      {x, wt, b}, [&] { return weighted_sum(conv2d(x, wt, b, algo, act), 9); });
  EXPECT_LT(report.max_rel_error, 1e-4) << report.describe();
}

}  // namespace
}  // namespace rimseg
