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

#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "passband/alloc_tuning.hpp"
#include "passband/augment.hpp"
#include "passband/dataset.hpp"
#include "passband/model.hpp"
#include "passband/optimizer.hpp"

namespace passband {

struct TrainConfig {
  int batch_size = 128;
  double initial_lr = 0.1;
  std::vector<int> lr_milestones;
  double lr_gamma = 0.1;
  int epochs = 0;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;
  bool stochastic_augment = false;  // dataset doubling; applied by the caller
  bool random_crop_flip = true;     // per-sample crop/flip during training
  std::string model = "desk";

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(initial_lr >= 0.0)) throw std::invalid_argument("TrainConfig: initial_lr must be >= 0");
    if (!(lr_gamma > 0.0) || lr_gamma > 1.0)
      throw std::invalid_argument("TrainConfig: lr_gamma must be in (0, 1]");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    for (std::size_t i = 1; i < lr_milestones.size(); ++i)
      if (lr_milestones[i] <= lr_milestones[i - 1])
        throw std::invalid_argument("TrainConfig: milestones must be strictly increasing");
  }
};

/// initial_lr * gamma^(number of milestones <= epoch).
inline double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at_epoch: epoch must be >= 0");
  double lr = config.initial_lr;
  for (int m : config.lr_milestones)
    if (m <= epoch) lr *= config.lr_gamma;
  return lr;
}

struct EpochMetrics {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double wall_seconds = 0.0;
};

// Copies images `idx[first..last)` into an NCHW float batch, optionally
// applying the random crop/flip augmentation.
inline Tensor4<float> assemble_batch(const LabeledDataset& ds, const std::vector<std::size_t>& idx,
                                     std::size_t first, std::size_t last, bool augment, Rng* rng,
                                     std::vector<int>& labels) {
  const ImageTensor& sample = ds.items[idx[first]].image;
  Tensor4<float> batch(static_cast<int>(last - first), sample.channels, sample.height,
                       sample.width);
  labels.resize(last - first);
  for (std::size_t b = first; b < last; ++b) {
    const LabeledItem& item = ds.items[idx[b]];
    labels[b - first] = item.label;
    float* dst = batch.data.data() + batch.index(static_cast<int>(b - first), 0, 0, 0);
    if (augment) {
      random_crop_flip_into(dst, item.image, *rng);
    } else {
      for (std::size_t i = 0; i < item.image.data.size(); ++i)
        dst[i] = static_cast<float>(item.image.data[i]);
    }
  }
  return batch;
}

/// Eval-mode accuracy: running batch-norm statistics, no augmentation.
/// Images must already be normalized. The result is independent of
/// `batch_size` (the forward pass is computed per image).
inline double evaluate(BottleneckNet<float>& model, const LabeledDataset& ds,
                       int batch_size = 256) {
  tune_allocator_for_large_buffers();
  if (model.num_classes != ds.num_classes)
    throw std::invalid_argument("evaluate: model has " + std::to_string(model.num_classes) +
                                " classes, dataset has " + std::to_string(ds.num_classes));
  if (ds.items.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<std::size_t> idx(ds.items.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<int> labels;
  std::size_t correct = 0;
  for (std::size_t first = 0; first < idx.size(); first += batch_size) {
    const std::size_t last = std::min(idx.size(), first + batch_size);
    Tensor4<float> batch = assemble_batch(ds, idx, first, last, false, nullptr, labels);
    MatrixRM<float> logits = model.forward(batch, BatchNormMode::Eval);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      Eigen::Index arg;
      logits.row(i).maxCoeff(&arg);
      if (static_cast<int>(arg) == labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.items.size());
}

struct TrainResult {
  BottleneckNet<float> model;
  std::vector<EpochMetrics> metrics;
  std::uint64_t final_rng_state = 0;
};

/// From-scratch training: seeded per-epoch shuffle, optional per-sample
/// crop/flip, SGD with momentum and the multistep schedule, one metrics row
/// per epoch. Single-threaded and bit-reproducible for a fixed config and
/// data. Inputs must be normalized; a non-finite loss aborts with the epoch
/// and batch in the message.
inline TrainResult train(const TrainConfig& config, const LabeledDataset& train_set,
                         const LabeledDataset& val_set,
                         const std::function<void(const EpochMetrics&)>& on_epoch = nullptr) {
  tune_allocator_for_large_buffers();
  config.validate();
  if (train_set.items.empty() || val_set.items.empty())
    throw std::invalid_argument("train: datasets must be non-empty");
  check_dataset(train_set, "train");

  TrainResult result;
  result.model = build_model<float>(config.model, train_set.num_classes, config.seed);
  // Registry views must be taken after the model reaches its home.
  std::vector<ParamRef<float>> params = result.model.params();
  SgdState<float> sgd;
  const std::size_t n = train_set.items.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> labels;
  std::uint64_t last_rng_state = config.seed;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = lr_at_epoch(config, epoch);

    Rng shuffle_rng = rng_at(mix_seed(config.seed, 0x73687566ull), static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.below(i + 1)]);
    Rng aug_rng = rng_at(mix_seed(config.seed, 0x61756766ull), static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    int batch_index = 0;
    std::size_t first = 0;
    while (first < n) {
      std::size_t last = std::min(n, first + static_cast<std::size_t>(config.batch_size));
      // Batch-norm cannot take a singleton batch; fold a trailing single
      // sample into this batch instead.
      if (n - last == 1) last = n;
      Tensor4<float> batch =
          assemble_batch(train_set, order, first, last, config.random_crop_flip, &aug_rng, labels);
      MatrixRM<float> logits = result.model.forward(batch, BatchNormMode::Train);
      SoftmaxLoss<float> loss = softmax_cross_entropy(logits, labels);
      if (!std::isfinite(loss.loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(batch_index));
      result.model.backward(loss.grad_logits);
      sgd_step(params, sgd, static_cast<float>(lr), static_cast<float>(config.momentum),
               static_cast<float>(config.weight_decay));
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(last - first);
      first = last;
      ++batch_index;
    }
    last_rng_state = aug_rng.state();

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.val_acc = evaluate(result.model, val_set, config.batch_size);
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.final_rng_state = last_rng_state;
  return result;
}

/// Metrics log line: epoch, lr, train_loss, val_acc, wall_seconds. Only the
/// wall_seconds column varies between identical runs.
inline std::string format_metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::string out = "epoch,lr,train_loss,val_acc,wall_seconds\n";
  char line[160];
  for (const EpochMetrics& m : metrics) {
    std::snprintf(line, sizeof(line), "%d,%.10g,%.10g,%.10g,%.3f\n", m.epoch, m.lr, m.train_loss,
                  m.val_acc, m.wall_seconds);
    out += line;
  }
  return out;
}

}  // namespace passband
