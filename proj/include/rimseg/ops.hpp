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

// Differentiable elementwise, reduction and layout ops.
//
// Feature maps are channel-last: a rank-3 tensor is H x W x C, and "channel"
// ops act on the last axis of any rank >= 1 tensor.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "rimseg/tensor.hpp"

namespace rimseg {

// Floor applied before every logarithm of a probability.
inline constexpr double kLogFloor = 1e-12;
inline constexpr double kInstanceNormEps = 1e-5;

namespace detail {

template <typename T>
using Accum = std::conditional_t<std::is_same_v<T, float>, double, T>;

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <typename T, typename F>
void record(std::initializer_list<const Tensor<T>*> inputs, const Tensor<T>& out,
            F&& backward) {
  if (!should_record<T>(inputs)) return;
  std::vector<typename Tape<T>::StoragePtr> in;
  in.reserve(inputs.size());
  for (const auto* t : inputs) in.push_back(t->storage());
  Tape<T>::active()->record(std::move(in), out.storage(), std::forward<F>(backward));
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_string(a.shape()));
  }
}

// Applies out[i] = f(x[i]) with backward dx += dy * df(x[i], out[i]).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* __restrict xs = x.data().data();
  T* __restrict os = out.mutable_data().data();
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) os[i] = fwd(xs[i]);
  record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), deriv]() {
    if (!xp->requires_grad) return;
    T* __restrict g = xp->ensure_grad().data();
    const T* __restrict dy = op->grad.data();
    const T* __restrict xv = xp->data.data();
    const T* __restrict yv = op->data.data();
    const std::size_t n = xp->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += dy[i] * deriv(xv[i], yv[i]);
  });
  return out;
}

template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  auto os = out.mutable_data();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = a.data()[i] + b.data()[i];
  detail::record<T>({&a, &b}, out,
                    [ap = a.storage().get(), bp = b.storage().get(), op = out.storage().get()]() {
                      for (auto* p : {ap, bp}) {
                        if (!p->requires_grad) continue;
                        auto& g = p->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += op->grad[i];
                      }
                    });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  auto os = out.mutable_data();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = a.data()[i] - b.data()[i];
  detail::record<T>({&a, &b}, out,
                    [ap = a.storage().get(), bp = b.storage().get(), op = out.storage().get()]() {
                      if (ap->requires_grad) {
                        auto& g = ap->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += op->grad[i];
                      }
                      if (bp->requires_grad) {
                        auto& g = bp->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= op->grad[i];
                      }
                    });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  auto os = out.mutable_data();
  for (std::size_t i = 0; i < os.size(); ++i) os[i] = a.data()[i] * b.data()[i];
  detail::record<T>({&a, &b}, out,
                    [ap = a.storage().get(), bp = b.storage().get(), op = out.storage().get()]() {
                      if (ap->requires_grad) {
                        auto& g = ap->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += op->grad[i] * bp->data[i];
                      }
                      if (bp->requires_grad) {
                        auto& g = bp->ensure_grad();
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += op->grad[i] * ap->data[i];
                      }
                    });
  return out;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& x, T s) {
  return detail::unary(
      x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T s) {
  return detail::unary(
      x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

// Subgradient 0 at x == 0.
template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return detail::unary(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return static_cast<T>(v > T(0)) - static_cast<T>(v < T(0)); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return detail::unary(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto n = static_cast<Eigen::Index>(x.size());
  detail::ArrayMap<T>(out.mutable_data().data(), n) = detail::ConstArrayMap<T>(x.data().data(), n).exp();
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), n]() {
    if (!xp->requires_grad) return;
    detail::ArrayMap<T>(xp->ensure_grad().data(), n) +=
        detail::ConstArrayMap<T>(op->grad.data(), n) * detail::ConstArrayMap<T>(op->data.data(), n);
  });
  return out;
}

// log(max(x, floor)); the gradient is zero where the floor is active.
template <typename T>
Tensor<T> log_guarded(const Tensor<T>& x, T floor = T(kLogFloor)) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto n = static_cast<Eigen::Index>(x.size());
  detail::ArrayMap<T>(out.mutable_data().data(), n) =
      detail::ConstArrayMap<T>(x.data().data(), n).max(floor).log();
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), n, floor]() {
    if (!xp->requires_grad) return;
    const auto xv = detail::ConstArrayMap<T>(xp->data.data(), n);
    detail::ArrayMap<T>(xp->ensure_grad().data(), n) +=
        (xv > floor).select(detail::ConstArrayMap<T>(op->grad.data(), n) / xv.max(floor), T(0));
  });
  return out;
}

// Subgradient 0 at x == 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary(
      x, [](T v) { return std::max(v, T(0)); },
      [](T v, T) { return static_cast<T>(v > T(0)); });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  detail::Accum<T> acc = 0;
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get()]() {
    if (!xp->requires_grad) return;
    auto& g = xp->ensure_grad();
    const T dy = op->grad[0];
    for (auto& v : g) v += dy;
  });
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  if (x.size() == 0) throw ShapeError("mean_all of an empty tensor");
  return scalar_mul(sum_all(x), T(1) / static_cast<T>(x.size()));
}

// Sums over the last axis, keeping it with extent 1.
template <typename T>
Tensor<T> sum_channels(const Tensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("sum_channels of a scalar");
  const std::size_t c = x.shape().back();
  const std::size_t rows = c == 0 ? 0 : x.size() / c;
  Shape shape = x.shape();
  shape.back() = 1;
  Tensor<T> out = Tensor<T>::zeros(shape);
  auto xs = x.data();
  auto os = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    for (std::size_t k = 0; k < c; ++k) acc += xs[r * c + k];
    os[r] = acc;
  }
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), rows, c]() {
    if (!xp->requires_grad) return;
    auto& g = xp->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) g[r * c + k] += op->grad[r];
    }
  });
  return out;
}

// Mean over every axis but the last: [..., C] -> [C].
template <typename T>
Tensor<T> spatial_mean(const Tensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("spatial_mean of a scalar");
  const std::size_t c = x.shape().back();
  const std::size_t rows = c == 0 ? 0 : x.size() / c;
  if (rows == 0) throw ShapeError("spatial_mean of an empty tensor");
  std::vector<detail::Accum<T>> acc(c, 0);
  auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) acc[k] += xs[r * c + k];
  }
  Tensor<T> out = Tensor<T>::zeros({c});
  auto os = out.mutable_data();
  for (std::size_t k = 0; k < c; ++k) os[k] = static_cast<T>(acc[k] / static_cast<double>(rows));
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), rows, c]() {
    if (!xp->requires_grad) return;
    auto& g = xp->ensure_grad();
    const T inv = T(1) / static_cast<T>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) g[r * c + k] += op->grad[k] * inv;
    }
  });
  return out;
}

// Channels [begin, end) of the last axis.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  if (x.rank() == 0 || begin >= end || end > x.shape().back()) {
    throw ShapeError("slice_channels: bad range for shape " + shape_string(x.shape()));
  }
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.size() / c;
  const std::size_t n = end - begin;
  Shape shape = x.shape();
  shape.back() = n;
  Tensor<T> out = Tensor<T>::zeros(shape);
  auto xs = x.data();
  auto os = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xs.begin() + r * c + begin, n, os.begin() + r * n);
  }
  detail::record<T>({&x}, out,
                    [xp = x.storage().get(), op = out.storage().get(), rows, c, n, begin]() {
                      if (!xp->requires_grad) return;
                      auto& g = xp->ensure_grad();
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t k = 0; k < n; ++k) g[r * c + begin + k] += op->grad[r * n + k];
                      }
                    });
  return out;
}

// Concatenates along the last axis; all leading dimensions must agree.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ShapeError("concat_channels: incompatible shapes " + shape_string(a.shape()) +
                     " and " + shape_string(b.shape()));
  }
  const std::size_t ca = a.shape().back();
  const std::size_t cb = b.shape().back();
  const std::size_t rows = a.size() / ca;
  Shape shape = a.shape();
  shape.back() = ca + cb;
  Tensor<T> out = Tensor<T>::zeros(shape);
  auto os = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().begin() + r * ca, ca, os.begin() + r * (ca + cb));
    std::copy_n(b.data().begin() + r * cb, cb, os.begin() + r * (ca + cb) + ca);
  }
  detail::record<T>({&a, &b}, out,
                    [ap = a.storage().get(), bp = b.storage().get(), op = out.storage().get(),
                     rows, ca, cb]() {
                      const std::size_t c = ca + cb;
                      if (ap->requires_grad) {
                        auto& g = ap->ensure_grad();
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t k = 0; k < ca; ++k) g[r * ca + k] += op->grad[r * c + k];
                      }
                      if (bp->requires_grad) {
                        auto& g = bp->ensure_grad();
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t k = 0; k < cb; ++k) g[r * cb + k] += op->grad[r * c + ca + k];
                      }
                    });
  return out;
}

namespace detail {

// Forward difference along one spatial axis of an H x W x C tensor:
// out[h, w] = x[h + dh, w + dw] - x[h, w], zero where the neighbour is outside.
template <typename T>
Tensor<T> forward_difference(const Tensor<T>& x, bool along_x) {
  require_rank(x, 3, along_x ? "diff_x" : "diff_y");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const std::size_t step = along_x ? c : w * c;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.mutable_data();
  auto has_next = [=](std::size_t row, std::size_t col) {
    return along_x ? col + 1 < w : row + 1 < h;
  };
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      if (!has_next(row, col)) continue;
      const std::size_t base = (row * w + col) * c;
      for (std::size_t k = 0; k < c; ++k) os[base + k] = xs[base + step + k] - xs[base + k];
    }
  }
  record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), h, w, c, step, has_next]() {
    if (!xp->requires_grad) return;
    auto& g = xp->ensure_grad();
    for (std::size_t row = 0; row < h; ++row) {
      for (std::size_t col = 0; col < w; ++col) {
        if (!has_next(row, col)) continue;
        const std::size_t base = (row * w + col) * c;
        for (std::size_t k = 0; k < c; ++k) {
          g[base + step + k] += op->grad[base + k];
          g[base + k] -= op->grad[base + k];
        }
      }
    }
  });
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> diff_x(const Tensor<T>& x) {
  return detail::forward_difference(x, true);
}

template <typename T>
Tensor<T> diff_y(const Tensor<T>& x) {
  return detail::forward_difference(x, false);
}

// Per-channel standardization over spatial positions, no affine parameters.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(kInstanceNormEps)) {
  detail::require_rank(x, 3, "instance_norm");
  const std::size_t c = x.dim(2);
  const std::size_t n = x.dim(0) * x.dim(1);
  if (n < 2) throw ShapeError("instance_norm needs at least two spatial positions");
  auto xs = x.data();

  std::vector<detail::Accum<T>> mean(c, 0), var(c, 0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < c; ++k) mean[k] += xs[r * c + k];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      const auto d = xs[r * c + k] - mean[k];
      var[k] += d * d;
    }
  }
  std::vector<T> inv_std(c);
  for (std::size_t k = 0; k < c; ++k) {
    inv_std[k] = static_cast<T>(1.0 / std::sqrt(var[k] / static_cast<double>(n) + eps));
  }

  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto os = out.mutable_data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      os[r * c + k] = static_cast<T>((xs[r * c + k] - mean[k]) * inv_std[k]);
    }
  }
  detail::record<T>({&x}, out,
                    [xp = x.storage().get(), op = out.storage().get(), n, c, inv_std]() {
                      if (!xp->requires_grad) return;
                      // dx = inv_std * (dy - mean(dy) - y * mean(dy * y))
                      std::vector<detail::Accum<T>> mean_dy(c, 0), mean_dyy(c, 0);
                      const auto& y = op->data;
                      const auto& dy = op->grad;
                      for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t k = 0; k < c; ++k) {
                          mean_dy[k] += dy[r * c + k];
                          mean_dyy[k] += dy[r * c + k] * y[r * c + k];
                        }
                      }
                      for (std::size_t k = 0; k < c; ++k) {
                        mean_dy[k] /= static_cast<double>(n);
                        mean_dyy[k] /= static_cast<double>(n);
                      }
                      auto& g = xp->ensure_grad();
                      for (std::size_t r = 0; r < n; ++r) {
                        for (std::size_t k = 0; k < c; ++k) {
                          const std::size_t i = r * c + k;
                          g[i] += static_cast<T>(inv_std[k] * (dy[i] - mean_dy[k] - y[i] * mean_dyy[k]));
                        }
                      }
                    });
  return out;
}

// Softmax over the last axis with max subtraction.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("softmax_channels of a scalar");
  const std::size_t c = x.shape().back();
  const std::size_t rows = c == 0 ? 0 : x.size() / c;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto xs = x.data();
  auto os = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xs.data() + r * c;
    T* o = os.data() + r * c;
    const T mx = *std::max_element(in, in + c);
    for (std::size_t k = 0; k < c; ++k) o[k] = in[k] - mx;
  }
  detail::ArrayMap<T> ov(os.data(), static_cast<Eigen::Index>(os.size()));
  ov = ov.exp();
  for (std::size_t r = 0; r < rows; ++r) {
    T* o = os.data() + r * c;
    T total = 0;
    for (std::size_t k = 0; k < c; ++k) total += o[k];
    const T inv = T(1) / total;
    for (std::size_t k = 0; k < c; ++k) o[k] *= inv;
  }
  detail::record<T>({&x}, out, [xp = x.storage().get(), op = out.storage().get(), rows, c]() {
    if (!xp->requires_grad) return;
    auto& g = xp->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = op->data.data() + r * c;
      const T* dy = op->grad.data() + r * c;
      T dot = 0;
      for (std::size_t k = 0; k < c; ++k) dot += dy[k] * p[k];
      for (std::size_t k = 0; k < c; ++k) g[r * c + k] += p[k] * (dy[k] - dot);
    }
  });
  return out;
}

}  // namespace rimseg
