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

// Fits a freshly initialized network to one image and reads superpixels off
// the per-pixel argmax of its soft assignment.

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "rimseg/label_map.hpp"
#include "rimseg/nn.hpp"
#include "rimseg/objective.hpp"
#include "rimseg/ops.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg {

struct RunConfig {
  std::size_t n_superpixels = 500;  // upper bound N
  double lambda = 2.0;
  double alpha = 2.0;
  double beta = 10.0;
  double sigma = 8.0;
  std::size_t iterations = 1000;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  double width_mult = 1.0;
  std::size_t log_every = 50;

  LossCoefficients coefficients() const { return {lambda, alpha, beta, sigma}; }

  // Throws on unusable values; returns advisory warnings.
  std::vector<std::string> validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("RunConfig: " + msg); };
    if (n_superpixels < 2) fail("n_superpixels must be at least 2");
    if (iterations < 1) fail("iterations must be positive");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(width_mult > 0.0)) fail("width_mult must be positive");
    if (!(sigma > 0.0)) fail("sigma must be positive");
    if (!(lambda >= 0.0)) fail("lambda must be non-negative");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be non-negative");
    if (log_every < 1) fail("log_every must be positive");
    std::vector<std::string> warnings;
    if (lambda > 3.0) {
      warnings.push_back("lambda " + std::to_string(lambda) +
                         " is outside [0, 3]; assignments tend towards uniform");
    }
    return warnings;
  }
};

struct LossRecord {
  std::size_t iteration = 0;  // == iterations for the evaluation after the last update
  LossBreakdown loss;
};

struct SegmentationResult {
  LabelMap labels;
  std::size_t n_superpixels_used = 0;
  std::size_t n_connected_components = 0;
  std::vector<LossRecord> loss_history;
  std::optional<Tensor<float>> recon;  // normalized space, H x W x 3
  std::chrono::duration<double> elapsed{0};
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const LossBreakdown& loss)
      : std::runtime_error(message(iteration, loss)), iteration_(iteration), loss_(loss) {}

  std::size_t iteration() const { return iteration_; }
  const LossBreakdown& loss() const { return loss_; }

 private:
  static std::string message(std::size_t iteration, const LossBreakdown& l) {
    std::ostringstream os;
    os << "non-finite loss at iteration " << iteration << ": clustering=" << l.clustering
       << " smoothness=" << l.smoothness << " recons=" << l.recons << " total=" << l.total;
    return os.str();
  }

  std::size_t iteration_;
  LossBreakdown loss_;
};

// Per-pixel argmax over the channel axis; ties go to the lowest index.
template <typename T>
LabelMap extract_labels(const Tensor<T>& p) {
  detail::require_rank(p, 3, "extract_labels");
  const std::size_t h = p.dim(0), w = p.dim(1), n = p.dim(2);
  if (n == 0) throw ShapeError("extract_labels: no channels");
  LabelMap out(w, h);
  auto v = p.data();
  for (std::size_t i = 0; i < h * w; ++i) {
    const T* row = v.data() + i * n;
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (row[k] > row[best]) best = k;
    }
    out.labels[i] = static_cast<Label>(best);
  }
  return out;
}

using LossObserver = std::function<void(const LossRecord&)>;

namespace detail {

// Every iteration frees and reallocates the same multi-megabyte buffers.
// Keeping them in the heap instead of returning them to the kernel avoids
// refaulting those pages on each pass.
inline void retain_freed_memory() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
  });
#endif
}

}  // namespace detail

// Runs `cfg.iterations` Adam updates of forward -> objective -> backward on a
// model seeded by cfg.seed, then assigns each pixel to its argmax channel.
// `image` and `coords` are the normalized H x W x 3 colour and H x W x 2
// coordinate channels.
inline SegmentationResult segment(const Tensor<float>& image, const Tensor<float>& coords,
                                  const RunConfig& cfg, const LossObserver& observer = {}) {
  cfg.validate();
  detail::require_rank(image, 3, "segment image");
  detail::require_rank(coords, 3, "segment coords");
  if (image.dim(2) != 3 || coords.dim(2) != 2 || image.dim(0) != coords.dim(0) ||
      image.dim(1) != coords.dim(1)) {
    throw ShapeError("segment: expected H x W x 3 image and H x W x 2 coordinates, got " +
                     shape_string(image.shape()) + " and " + shape_string(coords.shape()));
  }
  detail::retain_freed_memory();
  const auto start = std::chrono::steady_clock::now();

  const Tensor<float> input = concat_channels(image.detach(), coords.detach());
  const Tensor<float> target = image.detach();
  const EdgeWeights<float> weights = compute_edge_weights(target, cfg.sigma);
  const LossCoefficients coeffs = cfg.coefficients();

  ModelParams<float> model = init_model<float>(cfg.n_superpixels, cfg.width_mult, cfg.seed);
  std::vector<Tensor<float>> params = model.parameters();
  AdamState<float> adam(params, AdamOptions{.learning_rate = cfg.learning_rate});

  SegmentationResult result;
  auto log = [&](std::size_t iteration, const LossBreakdown& loss) {
    result.loss_history.push_back({iteration, loss});
    if (observer) observer(result.loss_history.back());
  };

  Tape<float> tape;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    tape.clear();
    model.zero_grad();
    Tape<float>::Scope scope(tape);
    const ModelOutput<float> out = forward(model, input);
    const ObjectiveTerms<float> terms = total_loss(out.p, out.recon, target, weights, coeffs);
    const LossBreakdown loss = terms.breakdown();
    if (!loss.finite()) throw DivergenceError(t, loss);
    if (t % cfg.log_every == 0) log(t, loss);
    tape.backward(terms.total);
    adam_step(params, adam);
  }
  tape.clear();

  const ModelOutput<float> out = forward(model, input);
  const LossBreakdown final_loss =
      total_loss(out.p, out.recon, target, weights, coeffs).breakdown();
  if (!final_loss.finite()) throw DivergenceError(cfg.iterations, final_loss);
  log(cfg.iterations, final_loss);

  result.labels = extract_labels(out.p);
  result.n_superpixels_used = count_superpixels(result.labels);
  result.n_connected_components = count_connected_components(result.labels);
  result.recon = out.recon;
  result.elapsed = std::chrono::steady_clock::now() - start;
  return result;
}

}  // namespace rimseg
