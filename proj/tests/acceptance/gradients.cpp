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

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "acceptance/common.hpp"
#include "rimseg/conv2d.hpp"
#include "rimseg/nn.hpp"
#include "rimseg/objective.hpp"
#include "rimseg/ops.hpp"
#include "support/gradcheck.hpp"

namespace rimseg::acceptance {
namespace {

using Td = Tensor<double>;
using testing::check_gradients;
using testing::random_tensor;
using testing::weighted_sum;

struct OpCase {
  std::string name;
  std::vector<Td> leaves;
  std::function<Td(const std::vector<Td>&)> fn;
};

std::vector<OpCase> op_cases(std::mt19937_64& rng) {
  auto rt = [&](const Shape& s, double lo = -1.0, double hi = 1.0) {
    return random_tensor(s, rng, lo, hi);
  };
  std::vector<OpCase> cases;
  auto unary = [&](std::string name, Td x, std::function<Td(const Td&)> f) {
    cases.push_back({std::move(name), {std::move(x)},
                     [f](const std::vector<Td>& v) { return f(v[0]); }});
  };
  unary("abs", rt({3, 4, 2}, 0.1, 1.0), [](const Td& x) { return abs(scalar_mul(x, -1.0)); });
  unary("relu", rt({3, 4, 2}, 0.1, 1.0), [](const Td& x) { return relu(x); });
  unary("square", rt({3, 4, 2}), [](const Td& x) { return square(x); });
  unary("exp", rt({3, 4, 2}), [](const Td& x) { return exp(x); });
  unary("log", rt({3, 4, 2}, 0.1, 2.0), [](const Td& x) { return log_guarded(x); });
  unary("scalar_mul", rt({5}), [](const Td& x) { return scalar_mul(x, -2.5); });
  unary("add_scalar", rt({5}), [](const Td& x) { return add_scalar(x, 3.0); });
  unary("sum_channels", rt({2, 3, 4}), [](const Td& x) { return sum_channels(x); });
  unary("spatial_mean", rt({2, 3, 4}), [](const Td& x) { return spatial_mean(x); });
  unary("mean_all", rt({2, 3, 4}), [](const Td& x) { return mean_all(x); });
  unary("slice", rt({2, 3, 5}), [](const Td& x) { return slice_channels(x, 1, 4); });
  unary("diff_x", rt({3, 4, 2}), [](const Td& x) { return diff_x(x); });
  unary("diff_y", rt({3, 4, 2}), [](const Td& x) { return diff_y(x); });
  unary("instance_norm", rt({4, 5, 3}), [](const Td& x) { return instance_norm(x); });
  unary("softmax", rt({3, 4, 6}), [](const Td& x) { return softmax_channels(scalar_mul(x, 3.0)); });

  cases.push_back({"add_sub_mul", {rt({3, 3, 2}), rt({3, 3, 2})}, [](const std::vector<Td>& v) {
                     return mul(add(v[0], v[1]), sub(v[0], v[1]));
                   }});
  cases.push_back({"concat", {rt({3, 3, 2}), rt({3, 3, 3})},
                   [](const std::vector<Td>& v) { return concat_channels(v[0], v[1]); }});

  for (auto algo : {ConvAlgorithm::im2col, ConvAlgorithm::winograd}) {
    const std::string tag = algo == ConvAlgorithm::im2col ? "im2col" : "winograd";
    cases.push_back({"conv_" + tag, {rt({7, 9, 3}), rt({3, 3, 3, 4}), rt({4})},
                     [algo](const std::vector<Td>& v) { return conv2d(v[0], v[1], v[2], algo); }});
  }

  // Fused objective terms, fed through a softmax so p stays on the simplex.
  const Td image = rt({5, 6, 3});
  const auto weights = std::make_shared<EdgeWeights<double>>(compute_edge_weights(image, 8.0));
  cases.push_back({"clustering", {rt({5, 6, 4}, -2.0, 2.0)}, [](const std::vector<Td>& v) {
                     return clustering_loss(softmax_channels(v[0]), 2.0);
                   }});
  cases.push_back({"smoothness", {rt({5, 6, 4}, -2.0, 2.0)}, [weights](const std::vector<Td>& v) {
                     return smoothness_loss(softmax_channels(v[0]), *weights);
                   }});
  cases.push_back({"recons", {rt({5, 6, 3})},
                   [image](const std::vector<Td>& v) { return recons_loss(image, v[0]); }});
  return cases;
}

}  // namespace

int gradients(const Options&) {
  const Stopwatch clock;
  std::mt19937_64 rng(20261014);

  double worst_op = 0.0;
  std::string worst_op_name;
  std::size_t op_coords = 0;
  for (const auto& c : op_cases(rng)) {
    const auto fn = c.fn;
    const auto leaves = c.leaves;
    const auto report = check_gradients(
        leaves, [&, seed = static_cast<std::uint64_t>(op_coords + 1)] {
          Td y = fn(leaves);
          return y.size() == 1 ? y : weighted_sum(y, seed);
        });
    op_coords += report.checked;
    if (report.max_rel_error >= worst_op) {
      worst_op = report.max_rel_error;
      worst_op_name = c.name;
    }
  }

  // Whole model at N = 8, width 1/8, on a 16 x 16 input: every parameter.
  const std::size_t side = 16, n = 8;
  ModelParams<double> model = init_model<double>(n, 0.125, 7);
  const Td input = random_tensor({side, side, kInputChannels}, rng);
  const Td target = slice_channels(input, 0, 3).detach();
  const EdgeWeights<double> weights = compute_edge_weights(target, 8.0);
  const LossCoefficients coeffs{2.0, 2.0, 10.0, 8.0};
  auto model_loss = [&] {
    const ModelOutput<double> out = forward(model, input);
    return total_loss(out.p, out.recon, target, weights, coeffs).total;
  };
  const auto model_report = check_gradients(model.parameters(), model_loss);

  const double seconds = clock.wall();
  const bool pass = worst_op < 1e-4 && model_report.max_rel_error < 1e-3 && seconds < 120.0;
  return verdict(1, pass,
                 "op max rel err " + fmt("%.2e", worst_op) + " (" + worst_op_name + ", " +
                     std::to_string(op_coords) + " coords, need < 1e-4); model max rel err " +
                     fmt("%.2e", model_report.max_rel_error) + " over " +
                     std::to_string(model_report.checked) + " parameters (need < 1e-3); " +
                     fmt("%.1f", seconds) + " s (need < 120 s)");
}

}  // namespace rimseg::acceptance
