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

// The network. Layers own their parameters plus reusable forward/backward
// buffers and operate on channel-major ActBatch activations; the public
// forward/backward contract stays NCHW. Layer activations are handed around
// as references into layer-owned storage, so a forward pass allocates
// nothing after the first batch.
//
// Copying a model copies parameters and buffers, but the internal
// input-pointer wiring still refers to the source model; a forward pass
// re-establishes it, so copies must run forward before backward (training
// and gradient checking both do).

#include <cmath>
#include <string>
#include <vector>

#include "passband/layers.hpp"
#include "passband/rng.hpp"
#include "passband/tensor.hpp"

namespace passband {

/// Named view into one parameter or buffer tensor. `grad` is null for
/// buffers (batch-norm running statistics), which the optimizer skips.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
  std::vector<int> dims;
};

template <typename T>
class ConvLayer {
 public:
  int in_ch = 0, out_ch = 0, ksize = 1, stride = 1, pad = 0;
  Tensor4<T> weight, grad_weight;  // (out_ch, in_ch, k, k), rows contiguous per out channel
  std::vector<T> bias, grad_bias;

  void build(int in, int out, int k, int s, int p, Rng& rng) {
    in_ch = in;
    out_ch = out;
    ksize = k;
    stride = s;
    pad = p;
    weight = Tensor4<T>(out, in, k, k);
    grad_weight = Tensor4<T>(out, in, k, k);
    bias.assign(out, T(0));
    grad_bias.assign(out, T(0));
    // He-normal: stddev sqrt(2 / fan_in).
    const double stddev = std::sqrt(2.0 / (static_cast<double>(in) * k * k));
    for (T& v : weight.data) v = static_cast<T>(rng.normal() * stddev);
  }

  bool is_pointwise() const { return ksize == 1 && stride == 1 && pad == 0; }

  // `x` must stay alive until backward: the pointwise path keeps a reference
  // to it instead of materializing a patch matrix.
  const ActBatch<T>& forward(const ActBatch<T>& x, bool keep_cache) {
    detail::require(x.c == in_ch, "conv: input has " + std::to_string(x.c) +
                                      " channels, layer expects " + std::to_string(in_ch));
    const int oh = conv_out_dim(x.h, ksize, stride, pad);
    const int ow = conv_out_dim(x.w, ksize, stride, pad);
    detail::require(oh >= 1 && ow >= 1, "conv: kernel too large for input " + x.shape_string());
    (void)keep_cache;
    out_.resize_dims(x.n, out_ch, oh, ow);
    const Eigen::Index ckk = static_cast<Eigen::Index>(in_ch) * ksize * ksize;
    const Eigen::Index np = static_cast<Eigen::Index>(x.n) * oh * ow;
    Eigen::Map<const MatrixRM<T>> w_mat(weight.data.data(), out_ch, ckk);
    Eigen::Map<MatrixRM<T>> out_mat(out_.data.data(), out_ch, np);
    if (is_pointwise()) {
      Eigen::Map<const MatrixRM<T>> x_mat(x.data.data(), in_ch, np);
      out_mat.noalias() = w_mat * x_mat;
      input_ = &x;
    } else {
      detail::im2col_cm(x, ksize, stride, pad, cols_);
      out_mat.noalias() = w_mat * cols_;
      input_ = nullptr;
    }
    in_h_ = x.h;
    in_w_ = x.w;
    in_n_ = x.n;
    for (int oc = 0; oc < out_ch; ++oc) {
      const T b = bias[oc];
      if (b == T(0)) continue;
      T* slab = out_.slab_ptr(oc);
      for (Eigen::Index j = 0; j < np; ++j) slab[j] += b;
    }
    return out_;
  }

  const ActBatch<T>& backward(const ActBatch<T>& grad_out) {
    detail::require(grad_out.same_shape(out_), "conv backward: grad shape mismatch");
    const Eigen::Index ckk = static_cast<Eigen::Index>(in_ch) * ksize * ksize;
    const Eigen::Index np = static_cast<Eigen::Index>(grad_out.n) * grad_out.h * grad_out.w;
    Eigen::Map<const MatrixRM<T>> w_mat(weight.data.data(), out_ch, ckk);
    Eigen::Map<const MatrixRM<T>> go_mat(grad_out.data.data(), out_ch, np);
    Eigen::Map<MatrixRM<T>> gw_mat(grad_weight.data.data(), out_ch, ckk);
    for (int oc = 0; oc < out_ch; ++oc)
      grad_bias[oc] = detail::lane_sum(grad_out.slab_ptr(oc), static_cast<std::size_t>(np));
    gx_.resize_dims(in_n_, in_ch, in_h_, in_w_);
    if (is_pointwise()) {
      Eigen::Map<const MatrixRM<T>> x_mat(input_->data.data(), in_ch, np);
      gw_mat.noalias() = go_mat * x_mat.transpose();
      Eigen::Map<MatrixRM<T>> gx_mat(gx_.data.data(), in_ch, np);
      gx_mat.noalias() = w_mat.transpose() * go_mat;
    } else {
      gw_mat.noalias() = go_mat * cols_.transpose();
      gcols_.resize(ckk, np);
      gcols_.noalias() = w_mat.transpose() * go_mat;
      std::fill(gx_.data.begin(), gx_.data.end(), T(0));
      detail::col2im_add_cm(gcols_, ksize, stride, pad, gx_);
    }
    return gx_;
  }

  ActBatch<T>& mutable_grad_in() { return gx_; }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<ParamRef<T>>& buffers) {
    (void)buffers;
    params.push_back({prefix + ".weight", &weight.data, &grad_weight.data,
                      {out_ch, in_ch, ksize, ksize}});
    params.push_back({prefix + ".bias", &bias, &grad_bias, {out_ch}});
  }

 private:
  const ActBatch<T>* input_ = nullptr;  // pointwise path; re-set by every forward
  ActBatch<T> out_, gx_;
  MatrixRM<T> cols_, gcols_;
  int in_h_ = 0, in_w_ = 0, in_n_ = 0;
};

/// Batch norm with an optional fused ReLU on the output (the usual
/// conv -> BN -> ReLU unit collapses into one pass).
template <typename T>
class BatchNormLayer {
 public:
  std::vector<T> scale, shift, grad_scale, grad_shift;
  std::vector<T> running_mean, running_var;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
  bool relu_after = false;

  void build(int channels, bool fuse_relu = false) {
    scale.assign(channels, T(1));
    shift.assign(channels, T(0));
    grad_scale.assign(channels, T(0));
    grad_shift.assign(channels, T(0));
    running_mean.assign(channels, T(0));
    running_var.assign(channels, T(1));
    relu_after = fuse_relu;
  }

  const ActBatch<T>& forward(const ActBatch<T>& x, BatchNormMode mode) {
    const int c = static_cast<int>(scale.size());
    detail::require(x.c == c, "batchnorm: channel mismatch");
    if (mode == BatchNormMode::Train && x.n < 2)
      throw std::invalid_argument("batchnorm: train mode needs batch >= 2");
    input_ = &x;
    out_.resize_dims(x.n, x.c, x.h, x.w);
    const std::size_t slab = static_cast<std::size_t>(x.n) * x.plane();
    const T count = static_cast<T>(slab);
    mean_.resize(c);
    inv_std_.resize(c);
    if (relu_after) mask_.resize(x.size());
    for (int ch = 0; ch < c; ++ch) {
      T mean, var;
      if (mode == BatchNormMode::Train) {
        T sum, sum_sq;
        detail::lane_sum_sumsq(x.slab_ptr(ch), slab, sum, sum_sq);
        mean = sum / count;
        var = std::max(sum_sq / count - mean * mean, T(0));
        running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * mean;
        running_var[ch] = (T(1) - momentum) * running_var[ch] + momentum * var;
      } else {
        mean = running_mean[ch];
        var = running_var[ch];
      }
      const T inv_std = T(1) / std::sqrt(var + eps);
      mean_[ch] = mean;
      inv_std_[ch] = inv_std;
      const T a = scale[ch] * inv_std;
      const T b = shift[ch] - a * mean;
      const T* p = x.slab_ptr(ch);
      T* q = out_.slab_ptr(ch);
      if (relu_after) {
        std::uint8_t* m = mask_.data() + static_cast<std::size_t>(ch) * slab;
        for (std::size_t j = 0; j < slab; ++j) {
          const T v = a * p[j] + b;
          const bool active = v > T(0);
          m[j] = active;
          q[j] = active ? v : T(0);
        }
      } else {
        for (std::size_t j = 0; j < slab; ++j) q[j] = a * p[j] + b;
      }
    }
    return out_;
  }

  // Train-mode backward; recomputes xhat from the cached input and gates the
  // incoming gradient by the fused ReLU mask when present.
  const ActBatch<T>& backward(const ActBatch<T>& grad_out) {
    detail::require(grad_out.same_shape(out_), "batchnorm backward: grad shape mismatch");
    const ActBatch<T>& x = *input_;
    const int c = static_cast<int>(scale.size());
    const std::size_t slab = static_cast<std::size_t>(x.n) * x.plane();
    const T count = static_cast<T>(slab);
    gx_.resize_dims(x.n, x.c, x.h, x.w);
    for (int ch = 0; ch < c; ++ch) {
      const T* gy = grad_out.slab_ptr(ch);
      const T* p = x.slab_ptr(ch);
      const std::uint8_t* m =
          relu_after ? mask_.data() + static_cast<std::size_t>(ch) * slab : nullptr;
      const T mean = mean_[ch], inv_std = inv_std_[ch];
      // sum(gy_eff) and sum(gy_eff * x) in one fused lane reduction.
      T s[detail::kLanes] = {}, d[detail::kLanes] = {};
      std::size_t j = 0;
      for (; j + detail::kLanes <= slab; j += detail::kLanes)
        for (std::size_t l = 0; l < detail::kLanes; ++l) {
          const T g = (m && !m[j + l]) ? T(0) : gy[j + l];
          s[l] += g;
          d[l] += g * p[j + l];
        }
      T sum_gy = T(0), sum_gy_x = T(0);
      for (std::size_t l = 0; l < detail::kLanes; ++l) {
        sum_gy += s[l];
        sum_gy_x += d[l];
      }
      for (; j < slab; ++j) {
        const T g = (m && !m[j]) ? T(0) : gy[j];
        sum_gy += g;
        sum_gy_x += g * p[j];
      }
      const T sum_gy_xhat = (sum_gy_x - mean * sum_gy) * inv_std;
      grad_shift[ch] = sum_gy;
      grad_scale[ch] = sum_gy_xhat;
      const T coef = scale[ch] * inv_std / count;
      T* gx = gx_.slab_ptr(ch);
      for (std::size_t i = 0; i < slab; ++i) {
        const T g = (m && !m[i]) ? T(0) : gy[i];
        const T xhat = (p[i] - mean) * inv_std;
        gx[i] = coef * (count * g - sum_gy - xhat * sum_gy_xhat);
      }
    }
    return gx_;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<ParamRef<T>>& buffers) {
    const int c = static_cast<int>(scale.size());
    params.push_back({prefix + ".scale", &scale, &grad_scale, {c}});
    params.push_back({prefix + ".shift", &shift, &grad_shift, {c}});
    buffers.push_back({prefix + ".running_mean", &running_mean, nullptr, {c}});
    buffers.push_back({prefix + ".running_var", &running_var, nullptr, {c}});
  }

 private:
  const ActBatch<T>* input_ = nullptr;  // re-set by every forward
  ActBatch<T> out_, gx_;
  std::vector<T> mean_, inv_std_;
  std::vector<std::uint8_t> mask_;
};

/// Bottleneck residual unit: 1x1 reduce -> BN+ReLU -> 3x3 -> BN+ReLU ->
/// 1x1 expand -> BN, added to the (optionally projected) shortcut, then a
/// final ReLU. Spatial downsampling sits on the 3x3 conv and the projection.
template <typename T>
class BottleneckBlock {
 public:
  ConvLayer<T> conv1, conv2, conv3;
  BatchNormLayer<T> bn1, bn2, bn3;
  bool has_projection = false;
  ConvLayer<T> proj_conv;
  BatchNormLayer<T> proj_bn;

  void build(int in_ch, int mid_ch, int out_ch, int stride, Rng& rng,
             bool force_projection = false) {
    conv1.build(in_ch, mid_ch, 1, 1, 0, rng);
    bn1.build(mid_ch, /*fuse_relu=*/true);
    conv2.build(mid_ch, mid_ch, 3, stride, 1, rng);
    bn2.build(mid_ch, /*fuse_relu=*/true);
    conv3.build(mid_ch, out_ch, 1, 1, 0, rng);
    bn3.build(out_ch);
    has_projection = force_projection || in_ch != out_ch || stride != 1;
    if (has_projection) {
      proj_conv.build(in_ch, out_ch, 1, stride, 0, rng);
      proj_bn.build(out_ch);
    }
  }

  const ActBatch<T>& forward(const ActBatch<T>& x, BatchNormMode mode) {
    const bool train = mode == BatchNormMode::Train;
    const ActBatch<T>& a = bn1.forward(conv1.forward(x, train), mode);
    const ActBatch<T>& b = bn2.forward(conv2.forward(a, train), mode);
    const ActBatch<T>& main = bn3.forward(conv3.forward(b, train), mode);
    const ActBatch<T>& shortcut =
        has_projection ? proj_bn.forward(proj_conv.forward(x, train), mode) : x;
    detail::require(main.same_shape(shortcut),
                    "bottleneck: main path " + main.shape_string() + " vs shortcut " +
                        shortcut.shape_string());
    // Fused residual add + ReLU.
    out_.resize_dims(main.n, main.c, main.h, main.w);
    mask_.resize(out_.size());
    const T* mp = main.data.data();
    const T* sp = shortcut.data.data();
    T* op = out_.data.data();
    std::uint8_t* mk = mask_.data();
    const std::size_t total = out_.size();
    for (std::size_t i = 0; i < total; ++i) {
      const T v = mp[i] + sp[i];
      const bool active = v > T(0);
      mk[i] = active;
      op[i] = active ? v : T(0);
    }
    return out_;
  }

  const ActBatch<T>& backward(const ActBatch<T>& grad_out) {
    detail::require(grad_out.same_shape(out_), "bottleneck backward: grad shape mismatch");
    g_sum_.resize_dims(out_.n, out_.c, out_.h, out_.w);
    const T* gp = grad_out.data.data();
    const std::uint8_t* mk = mask_.data();
    T* gs = g_sum_.data.data();
    const std::size_t total = out_.size();
    for (std::size_t i = 0; i < total; ++i) gs[i] = mk[i] ? gp[i] : T(0);

    // Main path down to conv1's input gradient (a layer-owned buffer).
    const ActBatch<T>& g_main = conv1.backward(
        bn1.backward(conv2.backward(bn2.backward(conv3.backward(bn3.backward(g_sum_))))));
    ActBatch<T>& gx = conv1.mutable_grad_in();
    detail::require(&g_main == &gx, "bottleneck backward: unexpected buffer wiring");
    // The addition passes the gradient to the shortcut unchanged.
    if (has_projection) {
      const ActBatch<T>& g_short = proj_conv.backward(proj_bn.backward(g_sum_));
      T* a = gx.data.data();
      const T* b = g_short.data.data();
      for (std::size_t i = 0; i < gx.size(); ++i) a[i] += b[i];
    } else {
      T* a = gx.data.data();
      for (std::size_t i = 0; i < gx.size(); ++i) a[i] += gs[i];
    }
    return gx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<ParamRef<T>>& buffers) {
    conv1.collect(prefix + ".conv1", params, buffers);
    bn1.collect(prefix + ".bn1", params, buffers);
    conv2.collect(prefix + ".conv2", params, buffers);
    bn2.collect(prefix + ".bn2", params, buffers);
    conv3.collect(prefix + ".conv3", params, buffers);
    bn3.collect(prefix + ".bn3", params, buffers);
    if (has_projection) {
      proj_conv.collect(prefix + ".proj_conv", params, buffers);
      proj_bn.collect(prefix + ".proj_bn", params, buffers);
    }
  }

 private:
  ActBatch<T> out_, g_sum_;
  std::vector<std::uint8_t> mask_;
};

template <typename T>
class LinearLayer {
 public:
  int in_features = 0, out_features = 0;
  std::vector<T> weight, grad_weight;  // row-major (out, in)
  std::vector<T> bias, grad_bias;

  void build(int in, int out, Rng& rng) {
    in_features = in;
    out_features = out;
    weight.resize(static_cast<std::size_t>(out) * in);
    grad_weight.assign(weight.size(), T(0));
    bias.assign(out, T(0));
    grad_bias.assign(out, T(0));
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    for (T& v : weight) v = static_cast<T>(rng.normal() * stddev);
  }

  MatrixRM<T> forward(const MatrixRM<T>& x, bool keep_cache) {
    if (keep_cache) input_ = x;
    return linear_forward(x, weight_matrix(), bias);
  }

  MatrixRM<T> backward(const MatrixRM<T>& grad_out) {
    LinearGrads<T> grads = linear_backward(input_, weight_matrix(), grad_out);
    std::copy(grads.grad_weight.data(), grads.grad_weight.data() + grads.grad_weight.size(),
              grad_weight.begin());
    grad_bias = std::move(grads.grad_bias);
    return std::move(grads.grad_x);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<T>>& params,
               std::vector<ParamRef<T>>& buffers) {
    (void)buffers;
    params.push_back({prefix + ".weight", &weight, &grad_weight, {out_features, in_features}});
    params.push_back({prefix + ".bias", &bias, &grad_bias, {out_features}});
  }

 private:
  MatrixRM<T> weight_matrix() const {
    return Eigen::Map<const MatrixRM<T>>(weight.data(), out_features, in_features);
  }

  MatrixRM<T> input_;
};

/// Small bottleneck-residual classifier: 3x3 stem conv + BN + ReLU, three
/// stages of bottleneck blocks (widths 16/32/64 with 4x expansion, spatial
/// downsampling at the entry of stages two and three), global average pool,
/// linear classifier.
template <typename T>
class BottleneckNet {
 public:
  std::string descriptor;
  int num_classes = 0;
  ConvLayer<T> stem_conv;
  BatchNormLayer<T> stem_bn;
  std::vector<BottleneckBlock<T>> blocks;
  LinearLayer<T> fc;

  MatrixRM<T> forward(const Tensor4<T>& x, BatchNormMode mode) {
    const bool train = mode == BatchNormMode::Train;
    in_ = to_act_batch(x);
    const ActBatch<T>* t = &stem_bn.forward(stem_conv.forward(in_, train), mode);
    for (auto& block : blocks) t = &block.forward(*t, mode);
    gap_h_ = t->h;
    gap_w_ = t->w;
    // Global average pool: one contiguous plane per (channel, image).
    MatrixRM<T> features(t->n, t->c);
    const std::size_t plane = t->plane();
    for (int c = 0; c < t->c; ++c)
      for (int i = 0; i < t->n; ++i)
        features(i, c) = detail::lane_sum(t->plane_ptr(c, i), plane) / static_cast<T>(plane);
    return fc.forward(features, train);
  }

  Tensor4<T> backward(const MatrixRM<T>& grad_logits) {
    MatrixRM<T> gf = fc.backward(grad_logits);
    gap_grad_.resize_dims(static_cast<int>(gf.rows()), static_cast<int>(gf.cols()), gap_h_,
                          gap_w_);
    const T inv = T(1) / (static_cast<T>(gap_h_) * static_cast<T>(gap_w_));
    const std::size_t plane = gap_grad_.plane();
    for (int c = 0; c < gap_grad_.c; ++c)
      for (int i = 0; i < gap_grad_.n; ++i) {
        T* p = gap_grad_.plane_ptr(c, i);
        const T g = gf(i, c) * inv;
        for (std::size_t j = 0; j < plane; ++j) p[j] = g;
      }
    const ActBatch<T>* g = &gap_grad_;
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) g = &it->backward(*g);
    return from_act_batch(stem_conv.backward(stem_bn.backward(*g)));
  }

  // Views into live storage; rebuilt after any copy or move of the model.
  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> p, b;
    collect(p, b);
    return p;
  }
  std::vector<ParamRef<T>> buffers() {
    std::vector<ParamRef<T>> p, b;
    collect(p, b);
    return b;
  }
  /// Learnable parameters followed by running statistics, in a stable order.
  std::vector<ParamRef<T>> state() {
    std::vector<ParamRef<T>> p, b;
    collect(p, b);
    p.insert(p.end(), b.begin(), b.end());
    return p;
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for (const auto& ref : params()) total += ref.value->size();
    return total;
  }

 private:
  void collect(std::vector<ParamRef<T>>& p, std::vector<ParamRef<T>>& b) {
    stem_conv.collect("stem.conv", p, b);
    stem_bn.collect("stem.bn", p, b);
    for (std::size_t i = 0; i < blocks.size(); ++i)
      blocks[i].collect("block" + std::to_string(i), p, b);
    fc.collect("fc", p, b);
  }

  ActBatch<T> in_, gap_grad_;
  int gap_h_ = 0, gap_w_ = 0;
};

/// Builds a model from a depth descriptor. "desk" is the default desk-scale
/// network (one bottleneck block per stage); "desk2" doubles each stage.
/// Construction is deterministic given the seed.
template <typename T = float>
BottleneckNet<T> build_model(const std::string& descriptor, int num_classes, std::uint64_t seed) {
  int blocks_per_stage;
  if (descriptor == "desk")
    blocks_per_stage = 1;
  else if (descriptor == "desk2")
    blocks_per_stage = 2;
  else
    throw std::invalid_argument("build_model: unknown descriptor '" + descriptor +
                                "' (supported: desk, desk2)");
  if (num_classes < 2) throw std::invalid_argument("build_model: need at least 2 classes");

  BottleneckNet<T> net;
  net.descriptor = descriptor;
  net.num_classes = num_classes;
  Rng rng(mix_seed(seed, 0x6d6f64656cull));  // init stream
  const int stem = 16;
  net.stem_conv.build(3, stem, 3, 1, 1, rng);
  net.stem_bn.build(stem, /*fuse_relu=*/true);

  struct Stage {
    int mid, out, stride;
  };
  const Stage stages[3] = {{16, 64, 1}, {32, 128, 2}, {64, 256, 2}};
  int in_ch = stem;
  net.blocks.reserve(3 * blocks_per_stage);
  for (const Stage& stage : stages) {
    for (int j = 0; j < blocks_per_stage; ++j) {
      BottleneckBlock<T> block;
      block.build(in_ch, stage.mid, stage.out, j == 0 ? stage.stride : 1, rng);
      net.blocks.push_back(std::move(block));
      in_ch = stage.out;
    }
  }
  net.fc.build(in_ch, num_classes, rng);
  return net;
}

}  // namespace passband
