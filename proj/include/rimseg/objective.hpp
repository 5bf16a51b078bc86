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

// Superpixel objective
//
//   total = clustering + alpha * smoothness + beta * recons
//
//   clustering = mean_{h,w} H(P_{h,w}) - lambda * H(mean_{h,w} P_{h,w})
//   smoothness = mean_{h,w} |dx P|_1 exp(-|dx I|^2 / sigma)
//                         + |dy P|_1 exp(-|dy I|^2 / sigma)
//   recons     = mean squared error between I and the reconstruction
//
// H is the Shannon entropy in nats. Differences are forward differences,
// zero at the last column / row. Edge weights are constants.

#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>
#include <string>

#include "rimseg/ops.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg {

struct LossCoefficients {
  double lambda = 2.0;
  double alpha = 2.0;
  double beta = 10.0;
  double sigma = 8.0;
};

struct LossBreakdown {
  double clustering = 0.0;
  double smoothness = 0.0;
  double recons = 0.0;
  double total = 0.0;
  LossCoefficients coefficients;

  bool finite() const {
    return std::isfinite(clustering) && std::isfinite(smoothness) && std::isfinite(recons) &&
           std::isfinite(total);
  }
};

template <typename T>
struct EdgeWeights {
  Tensor<T> wx;  // H x W x 1
  Tensor<T> wy;  // H x W x 1
};

// Evaluated as a single tape entry:
//   d/dp_{i,k} = (1/HW) (-(log p_{i,k} + 1) + lambda (log m_k + 1))
// where each "+ 1" vanishes under the log floor.
template <typename T>
Tensor<T> clustering_loss(const Tensor<T>& p, double lambda) {
  if (lambda < 0.0) {
    throw std::invalid_argument("clustering_loss: lambda must be non-negative, got " +
                                std::to_string(lambda));
  }
  if (p.rank() == 0) throw ShapeError("clustering_loss: p must have a channel axis");
  const std::size_t n = p.shape().back();
  const std::size_t pixels = n == 0 ? 0 : p.size() / n;
  if (pixels == 0) throw ShapeError("clustering_loss: empty assignment");
  const T floor = static_cast<T>(kLogFloor);
  const auto count = static_cast<Eigen::Index>(p.size());
  auto logp = std::make_shared<AlignedVector<T>>(p.size());
  const auto pv = detail::ConstArrayMap<T>(p.data().data(), count);
  detail::ArrayMap<T>(logp->data(), count) = pv.max(floor).log();

  using Acc = detail::Accum<T>;
  Acc plogp = 0;
  std::vector<Acc> marginal(n, 0);
  {
    const T* pp = p.data().data();
    const T* lp = logp->data();
    for (std::size_t r = 0; r < pixels; ++r) {
      Acc row = 0;
      for (std::size_t k = 0; k < n; ++k) {
        row += pp[r * n + k] * lp[r * n + k];
        marginal[k] += pp[r * n + k];
      }
      plogp += row;
    }
  }
  std::vector<T> dmarg(n);
  Acc mlogm = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Acc m = marginal[k] / static_cast<Acc>(pixels);
    const Acc lm = std::log(std::max<Acc>(m, kLogFloor));
    mlogm += m * lm;
    dmarg[k] = static_cast<T>(lambda * (lm + (m > kLogFloor ? 1.0 : 0.0)));
  }
  const Acc value = -plogp / static_cast<Acc>(pixels) + lambda * mlogm;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(value));
  detail::record<T>({&p}, out,
                    [pp = p.storage().get(), op = out.storage().get(), logp, dmarg, n, pixels,
                     floor]() {
                      if (!pp->requires_grad) return;
                      const T scale = op->grad[0] / static_cast<T>(pixels);
                      T* __restrict g = pp->ensure_grad().data();
                      const T* __restrict pv = pp->data.data();
                      const T* __restrict lp = logp->data();
                      for (std::size_t r = 0; r < pixels; ++r) {
                        for (std::size_t k = 0; k < n; ++k) {
                          const std::size_t i = r * n + k;
                          const T active = static_cast<T>(pv[i] > floor);
                          g[i] += scale * (dmarg[k] - lp[i] - active);
                        }
                      }
                    });
  return out;
}

template <typename T>
EdgeWeights<T> compute_edge_weights(const Tensor<T>& image, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("compute_edge_weights: sigma must be positive");
  detail::require_rank(image, 3, "compute_edge_weights");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  auto px = image.data();
  EdgeWeights<T> out{Tensor<T>::full({h, w, 1}, T(1)), Tensor<T>::full({h, w, 1}, T(1))};
  auto wx = out.wx.mutable_data();
  auto wy = out.wy.mutable_data();
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t i = row * w + col;
      if (col + 1 < w) {
        double sq = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
          const double d = static_cast<double>(px[(i + 1) * c + k]) - px[i * c + k];
          sq += d * d;
        }
        wx[i] = static_cast<T>(std::exp(-sq / sigma));
      }
      if (row + 1 < h) {
        double sq = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
          const double d = static_cast<double>(px[(i + w) * c + k]) - px[i * c + k];
          sq += d * d;
        }
        wy[i] = static_cast<T>(std::exp(-sq / sigma));
      }
    }
  }
  return out;
}

// Single tape entry; the subgradient of |0| is 0.
template <typename T>
Tensor<T> smoothness_loss(const Tensor<T>& p, const EdgeWeights<T>& weights) {
  detail::require_rank(p, 3, "smoothness_loss");
  const Shape plane{p.dim(0), p.dim(1), 1};
  if (weights.wx.shape() != plane || weights.wy.shape() != plane) {
    throw ShapeError("smoothness_loss: edge weights " + shape_string(weights.wx.shape()) +
                     " do not match assignment " + shape_string(p.shape()));
  }
  const std::size_t h = p.dim(0), w = p.dim(1), n = p.dim(2);
  const T* pv = p.data().data();
  const T* wx = weights.wx.data().data();
  const T* wy = weights.wy.data().data();

  auto l1 = [n](const T* a, const T* b) {
    T acc = 0;
    for (std::size_t k = 0; k < n; ++k) acc += std::abs(b[k] - a[k]);
    return acc;
  };
  detail::Accum<T> total = 0;
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t i = row * w + col;
      if (col + 1 < w) total += wx[i] * l1(pv + i * n, pv + (i + 1) * n);
      if (row + 1 < h) total += wy[i] * l1(pv + i * n, pv + (i + w) * n);
    }
  }
  const double pixels = static_cast<double>(h * w);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / pixels));
  detail::record<T>(
      {&p}, out,
      [pp = p.storage().get(), op = out.storage().get(), wxs = weights.wx.storage(),
       wys = weights.wy.storage(), h, w, n, pixels]() {
        if (!pp->requires_grad) return;
        const T scale = static_cast<T>(op->grad[0] / pixels);
        T* g = pp->ensure_grad().data();
        const T* pv = pp->data.data();
        auto pair = [n, g, pv](std::size_t a, std::size_t b, T coeff) {
          T* __restrict ga = g + a * n;
          T* __restrict gb = g + b * n;
          const T* __restrict va = pv + a * n;
          const T* __restrict vb = pv + b * n;
          for (std::size_t k = 0; k < n; ++k) {
            const T d = vb[k] - va[k];
            const T s = coeff * (static_cast<T>(d > T(0)) - static_cast<T>(d < T(0)));
            gb[k] += s;
            ga[k] -= s;
          }
        };
        for (std::size_t row = 0; row < h; ++row) {
          for (std::size_t col = 0; col < w; ++col) {
            const std::size_t i = row * w + col;
            if (col + 1 < w) pair(i, i + 1, scale * wxs->data[i]);
            if (row + 1 < h) pair(i, i + w, scale * wys->data[i]);
          }
        }
      });
  return out;
}

template <typename T>
Tensor<T> recons_loss(const Tensor<T>& image, const Tensor<T>& recon) {
  detail::require_same_shape(image, recon, "recons_loss");
  return mean_all(square(sub(image, recon)));
}

template <typename T>
struct ObjectiveTerms {
  Tensor<T> clustering;
  Tensor<T> smoothness;
  Tensor<T> recons;
  Tensor<T> total;
  LossCoefficients coefficients;

  LossBreakdown breakdown() const {
    return {static_cast<double>(clustering.item()), static_cast<double>(smoothness.item()),
            static_cast<double>(recons.item()), static_cast<double>(total.item()), coefficients};
  }
};

// beta == 0 keeps the reconstruction out of the total (and out of the
// gradient); its value is still reported.
template <typename T>
ObjectiveTerms<T> total_loss(const Tensor<T>& p, const Tensor<T>& recon, const Tensor<T>& image,
                             const EdgeWeights<T>& weights, const LossCoefficients& coeffs) {
  ObjectiveTerms<T> terms;
  terms.coefficients = coeffs;
  terms.clustering = clustering_loss(p, coeffs.lambda);
  terms.smoothness = smoothness_loss(p, weights);
  terms.recons = recons_loss(image, recon);
  terms.total = terms.clustering;
  if (coeffs.alpha != 0.0) {
    terms.total = add(terms.total, scalar_mul(terms.smoothness, static_cast<T>(coeffs.alpha)));
  }
  if (coeffs.beta != 0.0) {
    terms.total = add(terms.total, scalar_mul(terms.recons, static_cast<T>(coeffs.beta)));
  }
  return terms;
}

}  // namespace rimseg
