/*
 * Copyright 2026 The passband authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Layer forward/backward kernels. Everything here is a plain function of its
// arguments; parameter ownership, caching, and wiring live in model.hpp.
// Convolutions are whole-batch im2col + GEMM: single-core throughput lives
// and dies by GEMM size, so the batch dimension is folded into the patch
// matrix instead of looping images.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "passband/errors.hpp"
#include "passband/tensor.hpp"

namespace passband {

template <typename T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw shape_error(msg);
}

// Reductions used on the hot path. A fixed 16-lane decomposition vectorizes
// without -ffast-math and, unlike Eigen's redux, never depends on the buffer
// address, so results are bit-reproducible run to run.
inline constexpr std::size_t kLanes = 16;

template <typename T>
T lane_sum(const T* p, std::size_t n) {
  T acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += p[i + j];
  T total = T(0);
  for (std::size_t j = 0; j < kLanes; ++j) total += acc[j];
  for (; i < n; ++i) total += p[i];
  return total;
}

template <typename T>
void lane_sum_sumsq(const T* p, std::size_t n, T& sum_out, T& sumsq_out) {
  T s[kLanes] = {}, q[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) {
      const T v = p[i + j];
      s[j] += v;
      q[j] += v * v;
    }
  T st = T(0), qt = T(0);
  for (std::size_t j = 0; j < kLanes; ++j) {
    st += s[j];
    qt += q[j];
  }
  for (; i < n; ++i) {
    st += p[i];
    qt += p[i] * p[i];
  }
  sum_out = st;
  sumsq_out = qt;
}

template <typename T>
void lane_sum_dot(const T* a, const T* b, std::size_t n, T& sum_a_out, T& dot_out) {
  T s[kLanes] = {}, d[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) {
      s[j] += a[i + j];
      d[j] += a[i + j] * b[i + j];
    }
  T st = T(0), dt = T(0);
  for (std::size_t j = 0; j < kLanes; ++j) {
    st += s[j];
    dt += d[j];
  }
  for (; i < n; ++i) {
    st += a[i];
    dt += a[i] * b[i];
  }
  sum_a_out = st;
  dot_out = dt;
}

// Whole-batch patch matrix: row (c*k + ki)*k + kj holds, for every image and
// output position, the input value under kernel tap (ki, kj); zero where the
// tap falls in the padding. Column block i covers image i.
template <typename T>
void im2col_batch(const Tensor4<T>& x, int k, int stride, int pad, MatrixRM<T>& cols) {
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  const std::size_t per_image = static_cast<std::size_t>(oh) * ow;
  cols.resize(static_cast<Eigen::Index>(x.c) * k * k,
              static_cast<Eigen::Index>(x.n) * static_cast<Eigen::Index>(per_image));
  if (k == 1 && stride == 1 && pad == 0) {
    for (int image = 0; image < x.n; ++image)
      for (int c = 0; c < x.c; ++c)
        std::copy(x.data.data() + x.index(image, c, 0, 0),
                  x.data.data() + x.index(image, c, 0, 0) + per_image,
                  cols.data() + static_cast<std::size_t>(c) * (x.n * per_image) +
                      image * per_image);
    return;
  }
  for (int image = 0; image < x.n; ++image) {
    for (int c = 0; c < x.c; ++c) {
      const T* src_plane = x.data.data() + x.index(image, c, 0, 0);
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          T* dst = cols.data() +
                   static_cast<std::size_t>((c * k + ki) * k + kj) * (x.n * per_image) +
                   image * per_image;
          for (int oy = 0; oy < oh; ++oy, dst += ow) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= x.h) {
              std::fill(dst, dst + ow, T(0));
              continue;
            }
            const T* src_row = src_plane + static_cast<std::size_t>(iy) * x.w;
            if (stride == 1) {
              const int first = std::max(0, pad - kj);        // ix = ox - pad + kj >= 0
              const int last = std::min(ow, x.w + pad - kj);  // ix < x.w
              if (first > 0) std::fill(dst, dst + std::min(first, ow), T(0));
              if (last < ow) std::fill(dst + std::max(last, 0), dst + ow, T(0));
              if (last > first)
                std::copy(src_row + first - pad + kj, src_row + last - pad + kj, dst + first);
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kj;
                dst[ox] = (ix < 0 || ix >= x.w) ? T(0) : src_row[ix];
              }
            }
          }
        }
      }
    }
  }
}

// Transpose of im2col_batch: scatter-adds patch-matrix gradients back onto
// the input batch.
template <typename T>
void col2im_add_batch(const MatrixRM<T>& cols, int k, int stride, int pad, Tensor4<T>& gx) {
  const int oh = conv_out_dim(gx.h, k, stride, pad);
  const int ow = conv_out_dim(gx.w, k, stride, pad);
  const std::size_t per_image = static_cast<std::size_t>(oh) * ow;
  if (k == 1 && stride == 1 && pad == 0) {
    for (int image = 0; image < gx.n; ++image)
      for (int c = 0; c < gx.c; ++c) {
        const T* src = cols.data() + static_cast<std::size_t>(c) * (gx.n * per_image) +
                       image * per_image;
        T* dst = gx.data.data() + gx.index(image, c, 0, 0);
        for (std::size_t j = 0; j < per_image; ++j) dst[j] += src[j];
      }
    return;
  }
  for (int image = 0; image < gx.n; ++image) {
    for (int c = 0; c < gx.c; ++c) {
      T* dst_plane = gx.data.data() + gx.index(image, c, 0, 0);
      for (int ki = 0; ki < k; ++ki) {
        for (int kj = 0; kj < k; ++kj) {
          const T* src = cols.data() +
                         static_cast<std::size_t>((c * k + ki) * k + kj) * (gx.n * per_image) +
                         image * per_image;
          for (int oy = 0; oy < oh; ++oy, src += ow) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= gx.h) continue;
            T* dst_row = dst_plane + static_cast<std::size_t>(iy) * gx.w;
            if (stride == 1) {
              const int first = std::max(0, pad - kj);
              const int last = std::min(ow, gx.w + pad - kj);
              for (int ox = first; ox < last; ++ox) dst_row[ox - pad + kj] += src[ox];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kj;
                if (ix >= 0 && ix < gx.w) dst_row[ix] += src[ox];
              }
            }
          }
        }
      }
    }
  }
}

// NCHW -> (channels, n*P) gather so gradients can feed batch-wide GEMMs.
template <typename T>
void gather_channel_major(const Tensor4<T>& t, MatrixRM<T>& out) {
  const std::size_t per_image = t.plane();
  out.resize(t.c, static_cast<Eigen::Index>(t.n) * static_cast<Eigen::Index>(per_image));
  for (int image = 0; image < t.n; ++image)
    for (int c = 0; c < t.c; ++c)
      std::copy(t.data.data() + t.index(image, c, 0, 0),
                t.data.data() + t.index(image, c, 0, 0) + per_image,
                out.data() + static_cast<std::size_t>(c) * (t.n * per_image) + image * per_image);
}

// (channels, n*P) -> NCHW scatter, adding the per-channel bias on the way.
template <typename T>
void scatter_channel_major(const MatrixRM<T>& mat, const std::vector<T>& bias, Tensor4<T>& out) {
  const std::size_t per_image = out.plane();
  for (int image = 0; image < out.n; ++image)
    for (int c = 0; c < out.c; ++c) {
      const T* src = mat.data() + static_cast<std::size_t>(c) * (out.n * per_image) +
                     image * per_image;
      T* dst = out.data.data() + out.index(image, c, 0, 0);
      if (bias.empty()) {
        std::copy(src, src + per_image, dst);
      } else {
        const T b = bias[c];
        for (std::size_t j = 0; j < per_image; ++j) dst[j] = src[j] + b;
      }
    }
}

template <typename T>
void check_conv_args(const Tensor4<T>& x, const Tensor4<T>& weights, const std::vector<T>& bias,
                     int stride, int pad) {
  require(weights.c == x.c, "conv2d: weight input channels " + std::to_string(weights.c) +
                                " do not match input channels " + std::to_string(x.c));
  require(weights.h == weights.w, "conv2d: only square kernels are supported");
  require(bias.empty() || static_cast<int>(bias.size()) == weights.n,
          "conv2d: bias size does not match output channels");
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(pad >= 0, "conv2d: pad must be >= 0");
  require(conv_out_dim(x.h, weights.h, stride, pad) >= 1 &&
              conv_out_dim(x.w, weights.h, stride, pad) >= 1,
          "conv2d: kernel " + std::to_string(weights.h) + " too large for input " + x.shape_string());
}

}  // namespace detail

/// Forward GEMM against an already-built patch matrix.
template <typename T>
Tensor4<T> conv2d_forward_cols(const MatrixRM<T>& cols, const Tensor4<T>& weights,
                               const std::vector<T>& bias, int n, int oh, int ow) {
  const int out_ch = weights.n;
  const Eigen::Index ckk =
      static_cast<Eigen::Index>(weights.c) * weights.h * weights.w;
  Eigen::Map<const MatrixRM<T>> w_mat(weights.data.data(), out_ch, ckk);
  MatrixRM<T> out_mat;
  out_mat.noalias() = w_mat * cols;
  Tensor4<T> out(n, out_ch, oh, ow);
  detail::scatter_channel_major(out_mat, bias, out);
  return out;
}

/// Cross-correlation with zero padding. Weights are (out_ch, in_ch, k, k);
/// output spatial dims are (in + 2*pad - k)/stride + 1.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weights,
                          const std::vector<T>& bias, int stride, int pad) {
  detail::check_conv_args(x, weights, bias, stride, pad);
  const int k = weights.h;
  MatrixRM<T> cols;
  detail::im2col_batch(x, k, stride, pad, cols);
  return conv2d_forward_cols(cols, weights, bias, x.n,
                             conv_out_dim(x.h, k, stride, pad),
                             conv_out_dim(x.w, k, stride, pad));
}

template <typename T>
struct Conv2dGrads {
  Tensor4<T> grad_x;
  Tensor4<T> grad_weights;
  std::vector<T> grad_bias;
};

/// Backward GEMMs against the forward pass's patch matrix.
template <typename T>
Conv2dGrads<T> conv2d_backward_cols(const MatrixRM<T>& cols, const Tensor4<T>& weights,
                                    const Tensor4<T>& grad_out, int stride, int pad,
                                    int in_h, int in_w) {
  const int k = weights.h;
  const int out_ch = weights.n;
  const Eigen::Index ckk = static_cast<Eigen::Index>(weights.c) * k * k;
  const std::size_t np = grad_out.plane();

  Conv2dGrads<T> grads;
  grads.grad_x = Tensor4<T>(grad_out.n, weights.c, in_h, in_w);
  grads.grad_weights = Tensor4<T>(out_ch, weights.c, k, k);
  grads.grad_bias.assign(out_ch, T(0));

  MatrixRM<T> go_mat;
  detail::gather_channel_major(grad_out, go_mat);
  Eigen::Map<const MatrixRM<T>> w_mat(weights.data.data(), out_ch, ckk);
  Eigen::Map<MatrixRM<T>> gw_mat(grads.grad_weights.data.data(), out_ch, ckk);
  gw_mat.noalias() = go_mat * cols.transpose();
  for (int i = 0; i < grad_out.n; ++i)
    for (int oc = 0; oc < out_ch; ++oc)
      grads.grad_bias[oc] +=
          detail::lane_sum(grad_out.data.data() + grad_out.index(i, oc, 0, 0), np);
  MatrixRM<T> gcols;
  gcols.noalias() = w_mat.transpose() * go_mat;
  detail::col2im_add_batch(gcols, k, stride, pad, grads.grad_x);
  return grads;
}

/// Exact gradients of conv2d_forward with respect to input, weights, bias.
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& weights,
                               const Tensor4<T>& grad_out, int stride, int pad) {
  detail::check_conv_args(x, weights, std::vector<T>(), stride, pad);
  const int k = weights.h;
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  detail::require(grad_out.n == x.n && grad_out.c == weights.n && grad_out.h == oh &&
                      grad_out.w == ow,
                  "conv2d_backward: grad_out shape " + grad_out.shape_string() + " mismatch");
  MatrixRM<T> cols;
  detail::im2col_batch(x, k, stride, pad, cols);
  return conv2d_backward_cols(cols, weights, grad_out, stride, pad, x.h, x.w);
}

enum class BatchNormMode { Train, Eval };

template <typename T>
struct BatchNormCache {
  std::vector<T> xhat;     // normalized pre-scale activations, NCHW
  std::vector<T> inv_std;  // per channel
  int n = 0, c = 0, h = 0, w = 0;
};

/// Per-channel batch normalization over (batch, H, W). Train mode uses batch
/// statistics (population variance) and folds them into the running stats
/// with the given momentum; eval mode uses the running stats. Train mode
/// needs batch >= 2.
template <typename T>
Tensor4<T> batchnorm_forward(const Tensor4<T>& x, const std::vector<T>& scale,
                             const std::vector<T>& shift, std::vector<T>& running_mean,
                             std::vector<T>& running_var, BatchNormMode mode, T eps, T momentum,
                             BatchNormCache<T>* cache = nullptr) {
  detail::require(static_cast<int>(scale.size()) == x.c && static_cast<int>(shift.size()) == x.c &&
                      static_cast<int>(running_mean.size()) == x.c &&
                      static_cast<int>(running_var.size()) == x.c,
                  "batchnorm: parameter sizes must match channel count");
  if (mode == BatchNormMode::Train && x.n < 2)
    throw std::invalid_argument("batchnorm: train mode needs batch >= 2");

  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const std::size_t plane = x.plane();
  const T count = static_cast<T>(x.n) * static_cast<T>(plane);
  if (cache) {
    cache->xhat.resize(x.size());
    cache->inv_std.assign(x.c, T(0));
    cache->n = x.n;
    cache->c = x.c;
    cache->h = x.h;
    cache->w = x.w;
  }
  // Two streaming passes in memory order; per-channel accumulators.
  std::vector<T> mean(x.c), var(x.c);
  if (mode == BatchNormMode::Train) {
    std::vector<T> sum(x.c, T(0)), sum_sq(x.c, T(0));
    for (int i = 0; i < x.n; ++i)
      for (int c = 0; c < x.c; ++c) {
        T s, s2;
        detail::lane_sum_sumsq(x.data.data() + x.index(i, c, 0, 0), plane, s, s2);
        sum[c] += s;
        sum_sq[c] += s2;
      }
    for (int c = 0; c < x.c; ++c) {
      mean[c] = sum[c] / count;
      var[c] = std::max(sum_sq[c] / count - mean[c] * mean[c], T(0));
      running_mean[c] = (T(1) - momentum) * running_mean[c] + momentum * mean[c];
      running_var[c] = (T(1) - momentum) * running_var[c] + momentum * var[c];
    }
  } else {
    for (int c = 0; c < x.c; ++c) {
      mean[c] = running_mean[c];
      var[c] = running_var[c];
    }
  }
  std::vector<T> inv_std(x.c), a(x.c), b(x.c);
  for (int c = 0; c < x.c; ++c) {
    inv_std[c] = T(1) / std::sqrt(var[c] + eps);
    if (cache) cache->inv_std[c] = inv_std[c];
    a[c] = scale[c] * inv_std[c];
    b[c] = shift[c] - a[c] * mean[c];
  }
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.data.data() + x.index(i, c, 0, 0);
      T* q = y.data.data() + y.index(i, c, 0, 0);
      const T mc = mean[c], ic = inv_std[c], ac = a[c], bc = b[c];
      if (cache) {
        T* xh = cache->xhat.data() + y.index(i, c, 0, 0);
        for (std::size_t j = 0; j < plane; ++j) {
          xh[j] = (p[j] - mc) * ic;
          q[j] = ac * p[j] + bc;
        }
      } else {
        for (std::size_t j = 0; j < plane; ++j) q[j] = ac * p[j] + bc;
      }
    }
  return y;
}

template <typename T>
struct BatchNormGrads {
  Tensor4<T> grad_x;
  std::vector<T> grad_scale;
  std::vector<T> grad_shift;
};

/// Backward pass through train-mode batch statistics.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor4<T>& grad_out, const BatchNormCache<T>& cache,
                                     const std::vector<T>& scale) {
  detail::require(grad_out.n == cache.n && grad_out.c == cache.c && grad_out.h == cache.h &&
                      grad_out.w == cache.w,
                  "batchnorm_backward: grad_out shape mismatch");
  BatchNormGrads<T> grads;
  grads.grad_x = Tensor4<T>(cache.n, cache.c, cache.h, cache.w);
  grads.grad_scale.assign(cache.c, T(0));
  grads.grad_shift.assign(cache.c, T(0));
  const std::size_t plane = grad_out.plane();
  const T count = static_cast<T>(cache.n) * static_cast<T>(plane);
  for (int i = 0; i < cache.n; ++i)
    for (int c = 0; c < cache.c; ++c) {
      T s, sx;
      detail::lane_sum_dot(grad_out.data.data() + grad_out.index(i, c, 0, 0),
                           cache.xhat.data() + grad_out.index(i, c, 0, 0), plane, s, sx);
      grads.grad_shift[c] += s;
      grads.grad_scale[c] += sx;
    }
  for (int i = 0; i < cache.n; ++i)
    for (int c = 0; c < cache.c; ++c) {
      const T* gy = grad_out.data.data() + grad_out.index(i, c, 0, 0);
      const T* xh = cache.xhat.data() + grad_out.index(i, c, 0, 0);
      T* gx = grads.grad_x.data.data() + grad_out.index(i, c, 0, 0);
      const T coef = scale[c] * cache.inv_std[c] / count;
      const T sum_gy = grads.grad_shift[c], sum_gy_xhat = grads.grad_scale[c];
      for (std::size_t j = 0; j < plane; ++j)
        gx[j] = coef * (count * gy[j] - sum_gy - xh[j] * sum_gy_xhat);
    }
  return grads;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y = x;
  for (T& v : y.data)
    if (v < T(0)) v = T(0);
  return y;
}

/// Gradient gated by the forward output (y > 0 iff x > 0).
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& y) {
  detail::require(grad_out.same_shape(y), "relu_backward: shape mismatch");
  Tensor4<T> gx = grad_out;
  for (std::size_t i = 0; i < gx.data.size(); ++i)
    if (!(y.data[i] > T(0))) gx.data[i] = T(0);
  return gx;
}

template <typename T>
struct MaxPoolCache {
  std::vector<std::int32_t> argmax;  // flat input index per output element
  int n = 0, c = 0, h = 0, w = 0;    // input dims
};

/// 2x2 max pooling with stride 2; requires even spatial dims.
template <typename T>
Tensor4<T> maxpool2x2_forward(const Tensor4<T>& x, MaxPoolCache<T>* cache = nullptr) {
  detail::require(x.h % 2 == 0 && x.w % 2 == 0, "maxpool2x2: spatial dims must be even");
  Tensor4<T> y(x.n, x.c, x.h / 2, x.w / 2);
  if (cache) {
    cache->argmax.resize(y.size());
    cache->n = x.n;
    cache->c = x.c;
    cache->h = x.h;
    cache->w = x.w;
  }
  std::size_t o = 0;
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox, ++o) {
          std::size_t best = x.index(i, c, 2 * oy, 2 * ox);
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              std::size_t idx = x.index(i, c, 2 * oy + dy, 2 * ox + dx);
              if (x.data[idx] > x.data[best]) best = idx;
            }
          y.data[o] = x.data[best];
          if (cache) cache->argmax[o] = static_cast<std::int32_t>(best);
        }
  return y;
}

template <typename T>
Tensor4<T> maxpool2x2_backward(const Tensor4<T>& grad_out, const MaxPoolCache<T>& cache) {
  Tensor4<T> gx(cache.n, cache.c, cache.h, cache.w);
  detail::require(grad_out.size() == cache.argmax.size(), "maxpool2x2_backward: shape mismatch");
  for (std::size_t o = 0; o < grad_out.data.size(); ++o)
    gx.data[cache.argmax[o]] += grad_out.data[o];
  return gx;
}

/// Spatial mean per (image, channel): (n, c, h, w) -> (n, c) feature matrix.
template <typename T>
MatrixRM<T> global_avgpool_forward(const Tensor4<T>& x) {
  MatrixRM<T> y(x.n, x.c);
  const std::size_t plane = x.plane();
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const T* p = x.data.data() + x.index(i, c, 0, 0);
      T sum = T(0);
      for (std::size_t j = 0; j < plane; ++j) sum += p[j];
      y(i, c) = sum / static_cast<T>(plane);
    }
  return y;
}

template <typename T>
Tensor4<T> global_avgpool_backward(const MatrixRM<T>& grad_out, int h, int w) {
  Tensor4<T> gx(static_cast<int>(grad_out.rows()), static_cast<int>(grad_out.cols()), h, w);
  const T inv = T(1) / (static_cast<T>(h) * static_cast<T>(w));
  for (int i = 0; i < gx.n; ++i)
    for (int c = 0; c < gx.c; ++c) {
      T* p = gx.data.data() + gx.index(i, c, 0, 0);
      const T g = grad_out(i, c) * inv;
      for (std::size_t j = 0; j < gx.plane(); ++j) p[j] = g;
    }
  return gx;
}

/// y = x W^T + b with x (n, in), W (out, in).
template <typename T>
MatrixRM<T> linear_forward(const MatrixRM<T>& x, const MatrixRM<T>& weight,
                           const std::vector<T>& bias) {
  detail::require(x.cols() == weight.cols(), "linear: input width mismatch");
  detail::require(bias.empty() || static_cast<Eigen::Index>(bias.size()) == weight.rows(),
                  "linear: bias size mismatch");
  MatrixRM<T> y = x * weight.transpose();
  if (!bias.empty())
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      for (Eigen::Index j = 0; j < y.cols(); ++j) y(i, j) += bias[j];
  return y;
}

template <typename T>
struct LinearGrads {
  MatrixRM<T> grad_x;
  MatrixRM<T> grad_weight;
  std::vector<T> grad_bias;
};

template <typename T>
LinearGrads<T> linear_backward(const MatrixRM<T>& x, const MatrixRM<T>& weight,
                               const MatrixRM<T>& grad_out) {
  detail::require(grad_out.rows() == x.rows() && grad_out.cols() == weight.rows(),
                  "linear_backward: shape mismatch");
  LinearGrads<T> grads;
  grads.grad_x.noalias() = grad_out * weight;
  grads.grad_weight.noalias() = grad_out.transpose() * x;
  grads.grad_bias.assign(weight.rows(), T(0));
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i)
    for (Eigen::Index j = 0; j < grad_out.cols(); ++j) grads.grad_bias[j] += grad_out(i, j);
  return grads;
}

/// Channel-major activation batch: data[((c * n) + i) * h*w + p]. Channel
/// c's values for the whole batch form one contiguous slab, which is the
/// layout GEMMs want to read and write directly: a convolution over the
/// batch is W (out_ch x ckk) times patches (ckk x n*oh*ow) with no
/// gather/scatter, a 1x1 stride-1 convolution needs no patch matrix at all,
/// and batch-norm channel statistics reduce over one contiguous run.
/// model.hpp uses this internally; the NCHW Tensor4 ops above remain the
/// reference semantics.
template <typename T>
struct ActBatch {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return data.size(); }
  std::size_t index(int ci, int ni, int y, int x) const {
    return ((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x;
  }
  // Contiguous (h*w) plane of image ni under channel ci.
  const T* plane_ptr(int ci, int ni) const { return data.data() + index(ci, ni, 0, 0); }
  T* plane_ptr(int ci, int ni) { return data.data() + index(ci, ni, 0, 0); }
  // Contiguous (n*h*w) slab of channel ci.
  const T* slab_ptr(int ci) const { return data.data() + index(ci, 0, 0, 0); }
  T* slab_ptr(int ci) { return data.data() + index(ci, 0, 0, 0); }

  void resize_dims(int n_, int c_, int h_, int w_) {
    n = n_;
    c = c_;
    h = h_;
    w = w_;
    data.resize(static_cast<std::size_t>(n_) * c_ * h_ * w_);
  }
  bool same_shape(const ActBatch& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_string() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename T>
ActBatch<T> to_act_batch(const Tensor4<T>& t) {
  ActBatch<T> a;
  a.resize_dims(t.n, t.c, t.h, t.w);
  const std::size_t plane = t.plane();
  for (int i = 0; i < t.n; ++i)
    for (int c = 0; c < t.c; ++c)
      std::copy(t.data.data() + t.index(i, c, 0, 0),
                t.data.data() + t.index(i, c, 0, 0) + plane, a.plane_ptr(c, i));
  return a;
}

template <typename T>
Tensor4<T> from_act_batch(const ActBatch<T>& a) {
  Tensor4<T> t(a.n, a.c, a.h, a.w);
  const std::size_t plane = a.plane();
  for (int i = 0; i < a.n; ++i)
    for (int c = 0; c < a.c; ++c)
      std::copy(a.plane_ptr(c, i), a.plane_ptr(c, i) + plane,
                t.data.data() + t.index(i, c, 0, 0));
  return t;
}

namespace detail {

// im2col over a channel-major batch; column layout matches im2col_batch.
template <typename T>
void im2col_cm(const ActBatch<T>& x, int k, int stride, int pad, MatrixRM<T>& cols) {
  const int oh = conv_out_dim(x.h, k, stride, pad);
  const int ow = conv_out_dim(x.w, k, stride, pad);
  const std::size_t per_image = static_cast<std::size_t>(oh) * ow;
  cols.resize(static_cast<Eigen::Index>(x.c) * k * k,
              static_cast<Eigen::Index>(x.n) * static_cast<Eigen::Index>(per_image));
  for (int c = 0; c < x.c; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row_base = cols.data() +
                      static_cast<std::size_t>((c * k + ki) * k + kj) * (x.n * per_image);
        for (int image = 0; image < x.n; ++image) {
          const T* src_plane = x.plane_ptr(c, image);
          T* dst = row_base + static_cast<std::size_t>(image) * per_image;
          for (int oy = 0; oy < oh; ++oy, dst += ow) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= x.h) {
              for (int j = 0; j < ow; ++j) dst[j] = T(0);
              continue;
            }
            const T* src_row = src_plane + static_cast<std::size_t>(iy) * x.w;
            if (stride == 1) {
              const int first = std::max(0, pad - kj);
              const int last = std::min(ow, x.w + pad - kj);
              for (int j = 0; j < first; ++j) dst[j] = T(0);
              for (int j = std::max(last, 0); j < ow; ++j) dst[j] = T(0);
              const T* s = src_row - pad + kj;
              for (int j = first; j < last; ++j) dst[j] = s[j];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kj;
                dst[ox] = (ix < 0 || ix >= x.w) ? T(0) : src_row[ix];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add_cm(const MatrixRM<T>& cols, int k, int stride, int pad, ActBatch<T>& gx) {
  const int oh = conv_out_dim(gx.h, k, stride, pad);
  const int ow = conv_out_dim(gx.w, k, stride, pad);
  const std::size_t per_image = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < gx.c; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row_base = cols.data() +
                            static_cast<std::size_t>((c * k + ki) * k + kj) * (gx.n * per_image);
        for (int image = 0; image < gx.n; ++image) {
          T* dst_plane = gx.plane_ptr(c, image);
          const T* src = row_base + static_cast<std::size_t>(image) * per_image;
          for (int oy = 0; oy < oh; ++oy, src += ow) {
            const int iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= gx.h) continue;
            T* dst_row = dst_plane + static_cast<std::size_t>(iy) * gx.w;
            if (stride == 1) {
              const int first = std::max(0, pad - kj);
              const int last = std::min(ow, gx.w + pad - kj);
              T* d = dst_row - pad + kj;
              for (int j = first; j < last; ++j) d[j] += src[j];
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * stride - pad + kj;
                if (ix >= 0 && ix < gx.w) dst_row[ix] += src[ox];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
struct SoftmaxLoss {
  T loss = T(0);             // mean over the batch
  MatrixRM<T> grad_logits;   // d(mean loss)/d(logits)
};

/// Mean softmax cross-entropy with max-subtraction stabilization.
template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const MatrixRM<T>& logits, const std::vector<int>& labels) {
  detail::require(static_cast<Eigen::Index>(labels.size()) == logits.rows(),
                  "softmax_cross_entropy: one label per row required");
  const Eigen::Index n = logits.rows(), k = logits.cols();
  for (int label : labels)
    if (label < 0 || label >= k)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
  SoftmaxLoss<T> result;
  result.grad_logits.resize(n, k);
  T total = T(0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T row_max = logits.row(i).maxCoeff();
    T denom = T(0);
    for (Eigen::Index j = 0; j < k; ++j) {
      const T e = std::exp(logits(i, j) - row_max);
      result.grad_logits(i, j) = e;
      denom += e;
    }
    total += std::log(denom) - (logits(i, labels[i]) - row_max);
    const T inv = T(1) / denom;
    for (Eigen::Index j = 0; j < k; ++j) result.grad_logits(i, j) *= inv;
    result.grad_logits(i, labels[i]) -= T(1);
  }
  result.loss = total / static_cast<T>(n);
  result.grad_logits /= static_cast<T>(n);
  return result;
}

}  // namespace passband
