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

// The segmentation network (RGB + coordinates) -> (assignment, reconstruction)
// and the Adam optimizer that fits it to a single image.
//
// Architecture: five 3x3 conv + ReLU layers with 32, 64, 128, 256, 512
// channels (times width_mult, at least 4), then a 3x3 output conv with N + 3
// channels. The first N channels are instance-normalized and soft-maxed into
// the soft assignment P; the last 3 are the reconstruction, left linear.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rimseg/conv2d.hpp"
#include "rimseg/ops.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg {

inline constexpr std::size_t kInputChannels = 5;  // RGB + (x, y)
inline constexpr std::size_t kReconChannels = 3;
inline constexpr std::size_t kHiddenLayers = 5;
inline constexpr std::size_t kBaseChannels = 32;
inline constexpr std::size_t kMinHiddenChannels = 4;
inline constexpr std::size_t kKernelSize = 3;

// Hidden channel counts 32 * 2^(l-1) * width_mult for l = 1..5.
inline std::vector<std::size_t> hidden_channels(double width_mult) {
  if (!(width_mult > 0.0)) throw std::invalid_argument("width_mult must be positive");
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < kHiddenLayers; ++l) {
    const double c = std::round(static_cast<double>(kBaseChannels << l) * width_mult);
    out.push_back(std::max(kMinHiddenChannels, static_cast<std::size_t>(c)));
  }
  return out;
}

template <typename T>
struct ConvLayer {
  Tensor<T> weight;  // k x k x Cin x Cout
  Tensor<T> bias;    // Cout
};

template <typename T>
struct ModelParams {
  std::vector<ConvLayer<T>> layers;  // hidden layers then the output head
  std::size_t n_superpixels = 0;
  double width_mult = 1.0;
  std::uint64_t seed = 0;

  // Output channel count of every convolution, head last.
  std::vector<std::size_t> channels() const {
    std::vector<std::size_t> c;
    for (const auto& l : layers) c.push_back(l.weight.dim(3));
    return c;
  }

  std::vector<Tensor<T>> parameters() const {
    std::vector<Tensor<T>> p;
    for (const auto& l : layers) {
      p.push_back(l.weight);
      p.push_back(l.bias);
    }
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void zero_grad() {
    for (auto& l : layers) {
      l.weight.zero_grad();
      l.bias.zero_grad();
    }
  }
};

// Weights uniform in +/- sqrt(6 / fan_in), biases zero. Values are drawn in
// double from mt19937_64 bits so float and double models built from the same
// seed agree up to rounding.
template <typename T>
ModelParams<T> init_model(std::size_t n_superpixels, double width_mult, std::uint64_t seed) {
  if (n_superpixels < 2) {
    throw std::invalid_argument("n_superpixels must be at least 2, got " +
                                std::to_string(n_superpixels));
  }
  ModelParams<T> params;
  params.n_superpixels = n_superpixels;
  params.width_mult = width_mult;
  params.seed = seed;

  std::vector<std::size_t> outs = hidden_channels(width_mult);
  outs.push_back(n_superpixels + kReconChannels);

  std::mt19937_64 rng(seed);
  auto uniform01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::size_t cin = kInputChannels;
  for (std::size_t cout : outs) {
    const std::size_t fan_in = kKernelSize * kKernelSize * cin;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<T> w(fan_in * cout);
    for (auto& v : w) v = static_cast<T>((2.0 * uniform01() - 1.0) * bound);
    params.layers.push_back({Tensor<T>({kKernelSize, kKernelSize, cin, cout}, std::move(w), true),
                             Tensor<T>::zeros({cout}, true)});
    cin = cout;
  }
  return params;
}

template <typename T>
struct ModelOutput {
  Tensor<T> logits_p;  // H x W x N, before instance normalization
  Tensor<T> recon;     // H x W x 3
  Tensor<T> p;         // H x W x N soft assignment
};

template <typename T>
ModelOutput<T> forward(const ModelParams<T>& params, const Tensor<T>& input,
                       ConvAlgorithm algorithm = ConvAlgorithm::automatic) {
  if (input.rank() != 3 || input.dim(2) != kInputChannels) {
    throw ShapeError("forward: expected H x W x 5 input, got " + shape_string(input.shape()));
  }
  if (params.layers.size() != kHiddenLayers + 1) {
    throw std::invalid_argument("forward: model must have 6 convolutions");
  }
  Tensor<T> h = input;
  for (std::size_t l = 0; l < kHiddenLayers; ++l) {
    h = conv2d(h, params.layers[l].weight, params.layers[l].bias, algorithm, Activation::relu);
  }
  const auto& head = params.layers.back();
  Tensor<T> out = conv2d(h, head.weight, head.bias, algorithm);

  const std::size_t n = params.n_superpixels;
  ModelOutput<T> result;
  result.logits_p = slice_channels(out, 0, n);
  result.recon = slice_channels(out, n, n + kReconChannels);
  result.p = softmax_channels(instance_norm(result.logits_p));
  return result;
}

struct AdamOptions {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const std::vector<Tensor<T>>& params, AdamOptions opts) : options(opts) {
    for (const auto& p : params) {
      m.emplace_back(p.size(), T(0));
      v.emplace_back(p.size(), T(0));
    }
  }
};

// One bias-corrected Adam update over `params`, in place.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state) {
  if (params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: state was built for a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw std::logic_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].size() != params[i].size()) {
      throw ShapeError("adam_step: moment buffer does not match parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T step_size = static_cast<T>(o.learning_rate / (1.0 - std::pow(o.beta1, t)));
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(1.0 - std::pow(o.beta2, t)));
  const T eps = static_cast<T>(o.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + eps);
    }
  }
}

template <typename T>
void adam_step(ModelParams<T>& params, AdamState<T>& state) {
  auto p = params.parameters();
  adam_step(p, state);
}

}  // namespace rimseg
