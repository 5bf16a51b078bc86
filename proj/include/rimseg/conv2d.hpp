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

// Stride-1 "same" 2-D cross-correlation on H x W x Cin feature maps with a
// k x k x Cin x Cout kernel and zero padding (k - 1) / 2.
//
// Two algorithms compute the same function:
//   im2col    lowers the input to a (H*W) x (k*k*Cin) patch matrix and runs
//             one GEMM. Any odd k.
//   winograd  F(4x4, 3x3) minimal filtering (Lavin & Gray). Splits the output
//             into 4x4 tiles and replaces the 3x3 correlation per tile with
//             36 channel GEMMs in the transform domain, 4x fewer multiplies
//             than direct evaluation. k == 3 only.
// The winograd backward pass is the exact adjoint of its forward
// factorization, so both paths yield the true gradient of the convolution.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rimseg/ops.hpp"
#include "rimseg/tensor.hpp"

namespace rimseg {

enum class ConvAlgorithm { automatic, im2col, winograd };

// Elementwise function applied to the biased convolution output.
enum class Activation { identity, relu };

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::size_t h, w, cin, cout, k;
};

template <typename T>
ConvGeometry check_conv_shapes(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const std::size_t k = weight.dim(0);
  if (k % 2 == 0 || weight.dim(1) != k) {
    throw ShapeError("conv2d: kernel must be square with odd size, got " +
                     shape_string(weight.shape()));
  }
  if (weight.dim(2) != x.dim(2)) {
    throw ShapeError("conv2d: input has " + std::to_string(x.dim(2)) +
                     " channels but weight expects " + std::to_string(weight.dim(2)));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(3)) {
    throw ShapeError("conv2d: bias shape " + shape_string(bias.shape()) +
                     " does not match " + std::to_string(weight.dim(3)) + " output channels");
  }
  return {x.dim(0), x.dim(1), x.dim(2), weight.dim(3), k};
}

// Uninitialized scratch storage for buffers that are fully overwritten.
struct AlignedDelete {
  void operator()(void* p) const noexcept { ::operator delete(p, std::align_val_t{kStorageAlignment}); }
};

template <typename T>
using Buffer = std::unique_ptr<T[], AlignedDelete>;

// Uninitialized, aligned like tensor storage.
template <typename T>
Buffer<T> make_buffer(std::size_t n) {
  return Buffer<T>(
      static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kStorageAlignment})));
}

template <typename T>
void add_bias(std::span<T> out, std::span<const T> bias) {
  const std::size_t c = bias.size();
  for (std::size_t i = 0; i < out.size(); i += c)
    for (std::size_t o = 0; o < c; ++o) out[i + o] += bias[o];
}

template <typename T>
void accumulate_bias_grad(AlignedVector<T>& gb, const AlignedVector<T>& dy) {
  const std::size_t c = gb.size();
  for (std::size_t i = 0; i < dy.size(); i += c)
    for (std::size_t o = 0; o < c; ++o) gb[o] += dy[i + o];
}

template <typename T>
void apply_activation(std::span<T> y, Activation act) {
  if (act == Activation::relu) {
    for (auto& v : y) v = std::max(v, T(0));
  }
}

// Gradient with respect to the pre-activation output.
template <typename T>
const AlignedVector<T>& preactivation_grad(const TensorStorage<T>& out, Activation act,
                                            AlignedVector<T>& buffer) {
  if (act == Activation::identity) return out.grad;
  buffer.resize(out.grad.size());
  const T* __restrict dy = out.grad.data();
  const T* __restrict y = out.data.data();
  T* __restrict b = buffer.data();
  for (std::size_t i = 0; i < buffer.size(); ++i) b[i] = dy[i] * static_cast<T>(y[i] > T(0));
  return buffer;
}

// ---------------------------------------------------------------- im2col --

template <typename T>
RowMatrix<T> im2col(const T* x, const ConvGeometry& g) {
  const std::size_t r = g.k / 2;
  const std::size_t kcols = g.k * g.k * g.cin;
  RowMatrix<T> col = RowMatrix<T>::Zero(static_cast<Eigen::Index>(g.h * g.w),
                                        static_cast<Eigen::Index>(kcols));
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t xx = 0; xx < g.w; ++xx) {
      T* row = col.data() + (y * g.w + xx) * kcols;
      for (std::size_t dy = 0; dy < g.k; ++dy) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(r);
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t dx = 0; dx < g.k; ++dx) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + dx) - static_cast<std::ptrdiff_t>(r);
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.w)) continue;
          const T* src = x + (static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)) * g.cin;
          std::copy_n(src, g.cin, row + (dy * g.k + dx) * g.cin);
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_accumulate(const RowMatrix<T>& col, T* dx, const ConvGeometry& g) {
  const std::size_t r = g.k / 2;
  const std::size_t kcols = g.k * g.k * g.cin;
  for (std::size_t y = 0; y < g.h; ++y) {
    for (std::size_t xx = 0; xx < g.w; ++xx) {
      const T* row = col.data() + (y * g.w + xx) * kcols;
      for (std::size_t dy = 0; dy < g.k; ++dy) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + dy) - static_cast<std::ptrdiff_t>(r);
        if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
        for (std::size_t dx_ = 0; dx_ < g.k; ++dx_) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(xx + dx_) - static_cast<std::ptrdiff_t>(r);
          if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.w)) continue;
          T* dst = dx + (static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)) * g.cin;
          const T* src = row + (dy * g.k + dx_) * g.cin;
          for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> conv2d_im2col(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                        const ConvGeometry& g, Activation act) {
  const auto kcols = static_cast<Eigen::Index>(g.k * g.k * g.cin);
  const auto cout = static_cast<Eigen::Index>(g.cout);
  const auto pixels = static_cast<Eigen::Index>(g.h * g.w);
  Tensor<T> out = Tensor<T>::zeros({g.h, g.w, g.cout});
  {
    const RowMatrix<T> col = im2col(x.data().data(), g);
    MatMap<T> y(out.mutable_data().data(), pixels, cout);
    y.noalias() = col * ConstMatMap<T>(weight.data().data(), kcols, cout);
  }
  add_bias<T>(out.mutable_data(), bias.data());
  apply_activation<T>(out.mutable_data(), act);

  record<T>({&x, &weight, &bias}, out,
            [xp = x.storage().get(), wp = weight.storage().get(), bp = bias.storage().get(),
             op = out.storage().get(), g, kcols, cout, pixels, act]() {
              AlignedVector<T> masked;
              const AlignedVector<T>& dyv = preactivation_grad(*op, act, masked);
              ConstMatMap<T> dy(dyv.data(), pixels, cout);
              const RowMatrix<T> col = im2col(xp->data.data(), g);
              if (wp->requires_grad) {
                MatMap<T> dw(wp->ensure_grad().data(), kcols, cout);
                dw.noalias() += col.transpose() * dy;
              }
              if (bp->requires_grad) accumulate_bias_grad(bp->ensure_grad(), dyv);
              if (xp->requires_grad) {
                const RowMatrix<T> dcol = dy * ConstMatMap<T>(wp->data.data(), kcols, cout).transpose();
                col2im_accumulate(dcol, xp->ensure_grad().data(), g);
              }
            });
  return out;
}

// -------------------------------------------------------------- winograd --
//
// F(4x4, 3x3): Y = AT [(G g G^T) . (BT d BT^T)] AT^T for a 6x6 input tile d
// and 3x3 kernel g. Each 1-D transform below maps `In` lanes to `Out` lanes,
// every lane being a run of c contiguous channel values; lane k of the input
// starts at in + k * in_stride.

inline constexpr std::size_t kTile = 4;     // output tile edge
inline constexpr std::size_t kPatch = 6;    // input tile edge
inline constexpr std::size_t kPoints = 36;  // transform-domain points

// BT
struct InputTransform {
  static constexpr std::size_t In = 6, Out = 6;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *d0 = in, *d1 = in + is, *d2 = in + 2 * is, *d3 = in + 3 * is, *d4 = in + 4 * is,
            *d5 = in + 5 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os, *o3 = out + 3 * os, *o4 = out + 4 * os,
      *o5 = out + 5 * os;
    for (std::size_t k = 0; k < c; ++k) {
      const T a = d4[k] - T(4) * d2[k];
      const T b = d3[k] - T(4) * d1[k];
      const T e = d4[k] - d2[k];
      const T f = T(2) * (d3[k] - d1[k]);
      o0[k] = T(4) * d0[k] - T(5) * d2[k] + d4[k];
      o1[k] = a + b;
      o2[k] = a - b;
      o3[k] = e + f;
      o4[k] = e - f;
      o5[k] = T(4) * d1[k] - T(5) * d3[k] + d5[k];
    }
  }
};

// BT^T, adjoint of InputTransform.
struct InputTransformAdjoint {
  static constexpr std::size_t In = 6, Out = 6;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *i0 = in, *i1 = in + is, *i2 = in + 2 * is, *i3 = in + 3 * is, *i4 = in + 4 * is,
            *i5 = in + 5 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os, *o3 = out + 3 * os, *o4 = out + 4 * os,
      *o5 = out + 5 * os;
    for (std::size_t k = 0; k < c; ++k) {
      o0[k] = T(4) * i0[k];
      o1[k] = T(4) * (i2[k] - i1[k]) + T(2) * (i4[k] - i3[k]) + T(4) * i5[k];
      o2[k] = T(-5) * i0[k] - T(4) * (i1[k] + i2[k]) - i3[k] - i4[k];
      o3[k] = i1[k] - i2[k] + T(2) * (i3[k] - i4[k]) - T(5) * i5[k];
      o4[k] = i0[k] + i1[k] + i2[k] + i3[k] + i4[k];
      o5[k] = i5[k];
    }
  }
};

// G
struct KernelTransform {
  static constexpr std::size_t In = 3, Out = 6;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *g0 = in, *g1 = in + is, *g2 = in + 2 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os, *o3 = out + 3 * os, *o4 = out + 4 * os,
      *o5 = out + 5 * os;
    const T sixth = T(1) / T(6), twelfth = T(1) / T(12), tw4th = T(1) / T(24);
    for (std::size_t k = 0; k < c; ++k) {
      o0[k] = T(0.25) * g0[k];
      o1[k] = -sixth * (g0[k] + g1[k] + g2[k]);
      o2[k] = -sixth * (g0[k] - g1[k] + g2[k]);
      o3[k] = tw4th * g0[k] + twelfth * g1[k] + sixth * g2[k];
      o4[k] = tw4th * g0[k] - twelfth * g1[k] + sixth * g2[k];
      o5[k] = g2[k];
    }
  }
};

// G^T, adjoint of KernelTransform.
struct KernelTransformAdjoint {
  static constexpr std::size_t In = 6, Out = 3;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *i0 = in, *i1 = in + is, *i2 = in + 2 * is, *i3 = in + 3 * is, *i4 = in + 4 * is,
            *i5 = in + 5 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os;
    const T sixth = T(1) / T(6), twelfth = T(1) / T(12), tw4th = T(1) / T(24);
    for (std::size_t k = 0; k < c; ++k) {
      o0[k] = T(0.25) * i0[k] - sixth * (i1[k] + i2[k]) + tw4th * (i3[k] + i4[k]);
      o1[k] = sixth * (i2[k] - i1[k]) + twelfth * (i3[k] - i4[k]);
      o2[k] = sixth * (i3[k] + i4[k] - i1[k] - i2[k]) + i5[k];
    }
  }
};

// AT
struct OutputTransform {
  static constexpr std::size_t In = 6, Out = 4;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *m0 = in, *m1 = in + is, *m2 = in + 2 * is, *m3 = in + 3 * is, *m4 = in + 4 * is,
            *m5 = in + 5 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os, *o3 = out + 3 * os;
    for (std::size_t k = 0; k < c; ++k) {
      const T s12 = m1[k] + m2[k], d12 = m1[k] - m2[k];
      const T s34 = m3[k] + m4[k], d34 = m3[k] - m4[k];
      o0[k] = m0[k] + s12 + s34;
      o1[k] = d12 + T(2) * d34;
      o2[k] = s12 + T(4) * s34;
      o3[k] = d12 + T(8) * d34 + m5[k];
    }
  }
};

// AT^T, adjoint of OutputTransform.
struct OutputTransformAdjoint {
  static constexpr std::size_t In = 4, Out = 6;
  template <typename T>
  static void apply(const T* __restrict in, std::size_t is, T* __restrict out, std::size_t os, std::size_t c) {
    const T *y0 = in, *y1 = in + is, *y2 = in + 2 * is, *y3 = in + 3 * is;
    T *o0 = out, *o1 = out + os, *o2 = out + 2 * os, *o3 = out + 3 * os, *o4 = out + 4 * os,
      *o5 = out + 5 * os;
    for (std::size_t k = 0; k < c; ++k) {
      const T even = y0[k] + y2[k], odd = y1[k] + y3[k];
      const T even4 = y0[k] + T(4) * y2[k], odd4 = T(2) * y1[k] + T(8) * y3[k];
      o0[k] = y0[k];
      o1[k] = even + odd;
      o2[k] = even - odd;
      o3[k] = even4 + odd4;
      o4[k] = even4 - odd4;
      o5[k] = y3[k];
    }
  }
};

// Strided view of a 2-D grid of channel lanes: element (r, q) starts at
// base + r * row + q * col.
template <typename T>
struct LaneGrid {
  T* base;
  std::size_t row;
  std::size_t col;
};

// out = Tf * in * Tf^T on a grid of lanes; scratch holds Out x In x c values.
template <typename Tf, typename T>
void transform2d(LaneGrid<const T> in, LaneGrid<T> out, std::size_t c, T* scratch) {
  constexpr std::size_t kIn = Tf::In, kOut = Tf::Out;
  // columns: scratch(i, q) = sum_p Tf(i, p) in(p, q)
  for (std::size_t q = 0; q < kIn; ++q) {
    Tf::apply(in.base + q * in.col, in.row, scratch + q * c, kIn * c, c);
  }
  // rows: out(i, j) = sum_q scratch(i, q) Tf(j, q)
  for (std::size_t i = 0; i < kOut; ++i) {
    Tf::apply(static_cast<const T*>(scratch + i * kIn * c), c, out.base + i * out.row, out.col, c);
  }
}

struct TileGrid {
  std::size_t rows, cols;
  std::size_t count() const { return rows * cols; }
  bool interior(const ConvGeometry& g, std::size_t ty, std::size_t tx, std::size_t extent,
                std::size_t offset) const {
    return ty * kTile >= offset && tx * kTile >= offset && ty * kTile - offset + extent <= g.h &&
           tx * kTile - offset + extent <= g.w;
  }
};

// Transform-domain tensors are point-major: buffer[xi * point_stride + t * c + ch].
// The padding keeps the 36 point streams off a common cache set.
inline std::size_t point_stride(std::size_t rows, std::size_t cols) {
  return rows * cols + 16;
}

template <typename T>
Buffer<T> winograd_input_transform(const T* x, const ConvGeometry& g, const TileGrid& grid) {
  const std::size_t tiles = grid.count(), c = g.cin;
  const std::size_t ps = point_stride(tiles, c);
  Buffer<T> v = make_buffer<T>(kPoints * ps);
  std::vector<T> patch(kPoints * c), scratch(kPoints * c);
  for (std::size_t ty = 0; ty < grid.rows; ++ty) {
    for (std::size_t tx = 0; tx < grid.cols; ++tx) {
      const std::size_t t = ty * grid.cols + tx;
      LaneGrid<const T> src{};
      if (grid.interior(g, ty, tx, kPatch, 1)) {
        src = {x + ((ty * kTile - 1) * g.w + tx * kTile - 1) * c, g.w * c, c};
      } else {
        std::fill(patch.begin(), patch.end(), T(0));
        for (std::size_t i = 0; i < kPatch; ++i) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(ty * kTile + i) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t j = 0; j < kPatch; ++j) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(tx * kTile + j) - 1;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.w)) continue;
            std::copy_n(x + (static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)) * c, c,
                        patch.data() + (i * kPatch + j) * c);
          }
        }
        src = {patch.data(), kPatch * c, c};
      }
      transform2d<InputTransform>(src, LaneGrid<T>{v.get() + t * c, kPatch * ps, ps},
                                  c, scratch.data());
    }
  }
  return v;
}

// u[xi * point_stride + c * cout + o] = (G g_{c,o} G^T)_xi
template <typename T>
Buffer<T> winograd_weight_transform(const T* w, const ConvGeometry& g) {
  const std::size_t plane = g.cin * g.cout;
  const std::size_t ps = point_stride(g.cin, g.cout);
  Buffer<T> u = make_buffer<T>(kPoints * ps);
  std::vector<T> scratch(6 * 3 * g.cout);
  for (std::size_t c = 0; c < g.cin; ++c) {
    transform2d<KernelTransform>(LaneGrid<const T>{w + c * g.cout, 3 * plane, plane},
                                 LaneGrid<T>{u.get() + c * g.cout, kPatch * ps, ps}, g.cout,
                                 scratch.data());
  }
  return u;
}

template <typename T>
Tensor<T> conv2d_winograd(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                          const ConvGeometry& g, Activation act) {
  const TileGrid grid{(g.h + kTile - 1) / kTile, (g.w + kTile - 1) / kTile};
  const std::size_t tiles = grid.count();
  const auto ti = static_cast<Eigen::Index>(tiles);
  const auto ci = static_cast<Eigen::Index>(g.cin);
  const auto co = static_cast<Eigen::Index>(g.cout);
  const std::size_t psi = point_stride(tiles, g.cin), pso = point_stride(tiles, g.cout);
  const std::size_t psw = point_stride(g.cin, g.cout);

  std::shared_ptr<T[]> v = winograd_input_transform(x.data().data(), g, grid);
  std::shared_ptr<T[]> u = winograd_weight_transform(weight.data().data(), g);

  Buffer<T> m = make_buffer<T>(kPoints * pso);
  for (std::size_t xi = 0; xi < kPoints; ++xi) {
    MatMap<T>(m.get() + xi * pso, ti, co).noalias() =
        ConstMatMap<T>(v.get() + xi * psi, ti, ci) * ConstMatMap<T>(u.get() + xi * psw, ci, co);
  }

  Tensor<T> out = Tensor<T>::zeros({g.h, g.w, g.cout});
  {
    T* y = out.mutable_data().data();
    const std::size_t c = g.cout;
    std::vector<T> yt(kTile * kTile * c), scratch(kTile * kPatch * c);
    for (std::size_t ty = 0; ty < grid.rows; ++ty) {
      for (std::size_t tx = 0; tx < grid.cols; ++tx) {
        const std::size_t t = ty * grid.cols + tx;
        const LaneGrid<const T> src{m.get() + t * c, kPatch * pso, pso};
        if (grid.interior(g, ty, tx, kTile, 0)) {
          transform2d<OutputTransform>(
              src, LaneGrid<T>{y + (ty * kTile * g.w + tx * kTile) * c, g.w * c, c}, c, scratch.data());
          continue;
        }
        transform2d<OutputTransform>(src, LaneGrid<T>{yt.data(), kTile * c, c}, c, scratch.data());
        for (std::size_t i = 0; i < kTile && ty * kTile + i < g.h; ++i) {
          for (std::size_t j = 0; j < kTile && tx * kTile + j < g.w; ++j) {
            std::copy_n(yt.data() + (i * kTile + j) * c, c,
                        y + ((ty * kTile + i) * g.w + tx * kTile + j) * c);
          }
        }
      }
    }
  }
  add_bias<T>(out.mutable_data(), bias.data());
  apply_activation<T>(out.mutable_data(), act);

  record<T>({&x, &weight, &bias}, out,
            [xp = x.storage().get(), wp = weight.storage().get(), bp = bias.storage().get(),
             op = out.storage().get(), g, grid, v, u, psi, pso, psw, act]() {
              AlignedVector<T> masked;
              const AlignedVector<T>& dyv = preactivation_grad(*op, act, masked);
              const std::size_t tiles = grid.count();
              const auto ti = static_cast<Eigen::Index>(tiles);
              const auto ci = static_cast<Eigen::Index>(g.cin);
              const auto co = static_cast<Eigen::Index>(g.cout);

              // dM = AT^T dY_tile AT, with dY zero outside the image.
              Buffer<T> dm = make_buffer<T>(kPoints * pso);
              {
                const std::size_t c = g.cout;
                std::vector<T> dyt(kTile * kTile * c), scratch(kPatch * kTile * c);
                const T* dy = dyv.data();
                for (std::size_t ty = 0; ty < grid.rows; ++ty) {
                  for (std::size_t tx = 0; tx < grid.cols; ++tx) {
                    const std::size_t t = ty * grid.cols + tx;
                    LaneGrid<const T> src{};
                    if (grid.interior(g, ty, tx, kTile, 0)) {
                      src = {dy + (ty * kTile * g.w + tx * kTile) * c, g.w * c, c};
                    } else {
                      std::fill(dyt.begin(), dyt.end(), T(0));
                      for (std::size_t i = 0; i < kTile && ty * kTile + i < g.h; ++i) {
                        for (std::size_t j = 0; j < kTile && tx * kTile + j < g.w; ++j) {
                          std::copy_n(dy + ((ty * kTile + i) * g.w + tx * kTile + j) * c, c,
                                      dyt.data() + (i * kTile + j) * c);
                        }
                      }
                      src = {dyt.data(), kTile * c, c};
                    }
                    transform2d<OutputTransformAdjoint>(
                        src, LaneGrid<T>{dm.get() + t * c, kPatch * pso, pso}, c,
                        scratch.data());
                  }
                }
              }

              if (wp->requires_grad) {
                // dU = V^T dM per point, then dg = G^T dU G.
                Buffer<T> du = make_buffer<T>(kPoints * psw);
                for (std::size_t xi = 0; xi < kPoints; ++xi) {
                  MatMap<T>(du.get() + xi * psw, ci, co).noalias() =
                      ConstMatMap<T>(v.get() + xi * psi, ti, ci).transpose() *
                      ConstMatMap<T>(dm.get() + xi * pso, ti, co);
                }
                const std::size_t plane = g.cin * g.cout;
                Buffer<T> dk = make_buffer<T>(9 * plane);
                std::vector<T> scratch(3 * 6 * g.cout);
                for (std::size_t c = 0; c < g.cin; ++c) {
                  transform2d<KernelTransformAdjoint>(
                      LaneGrid<const T>{du.get() + c * g.cout, kPatch * psw, psw},
                      LaneGrid<T>{dk.get() + c * g.cout, 3 * plane, plane}, g.cout, scratch.data());
                }
                auto& gw = wp->ensure_grad();
                for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += dk[i];
              }

              if (bp->requires_grad) accumulate_bias_grad(bp->ensure_grad(), dyv);

              if (xp->requires_grad) {
                // dV = dM U^T per point, then dd = BT^T dV BT scattered into tiles.
                Buffer<T> dv = make_buffer<T>(kPoints * psi);
                for (std::size_t xi = 0; xi < kPoints; ++xi) {
                  MatMap<T>(dv.get() + xi * psi, ti, ci).noalias() =
                      ConstMatMap<T>(dm.get() + xi * pso, ti, co) *
                      ConstMatMap<T>(u.get() + xi * psw, ci, co).transpose();
                }
                const std::size_t c = g.cin;
                auto& gx = xp->ensure_grad();
                std::vector<T> dd(kPoints * c), scratch(kPoints * c);
                for (std::size_t ty = 0; ty < grid.rows; ++ty) {
                  for (std::size_t tx = 0; tx < grid.cols; ++tx) {
                    const std::size_t t = ty * grid.cols + tx;
                    transform2d<InputTransformAdjoint>(
                        LaneGrid<const T>{dv.get() + t * c, kPatch * psi, psi},
                        LaneGrid<T>{dd.data(), kPatch * c, c}, c, scratch.data());
                    for (std::size_t i = 0; i < kPatch; ++i) {
                      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(ty * kTile + i) - 1;
                      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                      for (std::size_t j = 0; j < kPatch; ++j) {
                        const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(tx * kTile + j) - 1;
                        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        T* dst = gx.data() +
                                 (static_cast<std::size_t>(sy) * g.w + static_cast<std::size_t>(sx)) * c;
                        const T* src = dd.data() + (i * kPatch + j) * c;
                        for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
                      }
                    }
                  }
                }
              }
            });
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 ConvAlgorithm algorithm = ConvAlgorithm::automatic,
                 Activation act = Activation::identity) {
  const detail::ConvGeometry g = detail::check_conv_shapes(x, weight, bias);
  if (algorithm == ConvAlgorithm::automatic) {
    algorithm = g.k == 3 ? ConvAlgorithm::winograd : ConvAlgorithm::im2col;
  }
  if (algorithm == ConvAlgorithm::winograd) {
    if (g.k != 3) throw ShapeError("conv2d: winograd path supports 3x3 kernels only");
    return detail::conv2d_winograd(x, weight, bias, g, act);
  }
  return detail::conv2d_im2col(x, weight, bias, g, act);
}

}  // namespace rimseg
