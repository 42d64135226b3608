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
#include <cstdint>
#include <string>
#include <vector>

#include "passband/dataset.hpp"
#include "passband/gaussian.hpp"
#include "passband/parallel.hpp"
#include "passband/rng.hpp"

namespace passband {

/// Random-filter policy: per item, draw a filter kind uniformly from
/// {high, low}, sigma uniformly from [sigma_min, sigma_max], and width
/// uniformly from width_choices.
struct AugmentPolicy {
  double sigma_min = 0.25;
  double sigma_max = 1.75;
  std::vector<int> width_choices = {2, 3, 4, 5, 6, 7};
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
      throw std::invalid_argument("AugmentPolicy: need 0 < sigma_min < sigma_max");
    if (width_choices.empty())
      throw std::invalid_argument("AugmentPolicy: width_choices must be non-empty");
    for (int w : width_choices)
      if (w < 1) throw std::invalid_argument("AugmentPolicy: widths must be >= 1");
  }
};

struct AugmentRecord {
  std::size_t source_index = 0;
  FilterSpec spec;
};

struct AugmentOutcome {
  LabeledDataset dataset;      // originals followed by one filtered copy each
  std::vector<AugmentRecord> provenance;  // one entry per generated copy
};

inline FilterSpec draw_filter_spec(Rng& rng, const AugmentPolicy& policy) {
  FilterSpec spec;
  spec.kind = rng.coin() ? FilterKind::HighPass : FilterKind::LowPass;
  spec.sigma = rng.uniform(policy.sigma_min, policy.sigma_max);
  spec.width = policy.width_choices[rng.below(policy.width_choices.size())];
  return spec;
}

/// Doubles the dataset: all originals, then one randomly filtered copy per
/// original with the same label. Copy i uses a generator derived from
/// (policy.seed, i), so the output is reproducible and identical for any
/// worker count.
inline AugmentOutcome stochastic_augment(const LabeledDataset& train, const AugmentPolicy& policy,
                                         int threads = 1) {
  policy.validate();
  check_dataset(train, "stochastic_augment");
  const std::size_t n = train.items.size();

  AugmentOutcome out;
  out.dataset.num_classes = train.num_classes;
  out.dataset.name = train.name + "+stochastic_filter";
  out.dataset.items.resize(2 * n);
  out.provenance.resize(n);
  std::copy(train.items.begin(), train.items.end(), out.dataset.items.begin());

  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng = rng_at(policy.seed, i);
    FilterSpec spec = draw_filter_spec(rng, policy);
    LabeledItem copy;
    copy.label = train.items[i].label;
    copy.image = apply_filter(train.items[i].image, spec);
    out.dataset.items[n + i] = std::move(copy);
    out.provenance[i] = AugmentRecord{i, spec};
  });
  return out;
}

/// Random 32x32 crop from a 4-pixel replicate-padded image, then a coin-flip
/// horizontal mirror. Draw order: row offset, column offset, flip.
/// Templated on the destination scalar so the trainer can fill float batches
/// without an intermediate image.
template <typename T>
void random_crop_flip_into(T* dst, const ImageTensor& src, Rng& rng, int pad = 4) {
  const int h = src.height, w = src.width;
  const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1)));
  const bool flip = rng.coin();
  std::size_t p = 0;
  for (int c = 0; c < src.channels; ++c)
    for (int y = 0; y < h; ++y) {
      const int sy = std::clamp(y + oy - pad, 0, h - 1);
      for (int x = 0; x < w; ++x) {
        const int xx = flip ? w - 1 - x : x;
        const int sx = std::clamp(xx + ox - pad, 0, w - 1);
        dst[p++] = static_cast<T>(src.at(c, sy, sx));
      }
    }
}

/// The conventional training-time augmentation: pad 4 (replicate), random
/// crop back to the original size, flip horizontally with probability 1/2.
inline ImageTensor standard_augment(const ImageTensor& img, Rng& rng) {
  check_image(img, "standard_augment");
  ImageTensor out(img.height, img.width, img.channels);
  random_crop_flip_into(out.data.data(), img, rng);
  return out;
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean and (population) standard deviation over every pixel of
/// every image. Computed from the original training split, before any
/// augmentation.
inline ChannelStats channel_stats(const LabeledDataset& ds) {
  check_dataset(ds, "channel_stats");
  if (ds.items.empty()) throw std::invalid_argument("channel_stats: empty dataset");
  const int channels = ds.items.front().image.channels;
  const std::size_t plane = ds.items.front().image.plane();
  ChannelStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  const double count = static_cast<double>(plane) * ds.items.size();
  for (int c = 0; c < channels; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& item : ds.items) {
      const double* p = item.image.data.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += p[i];
        sum_sq += p[i] * p[i];
      }
    }
    const double mean = sum / count;
    stats.mean[c] = mean;
    stats.stddev[c] = std::sqrt(std::max(sum_sq / count - mean * mean, 0.0));
  }
  return stats;
}

/// Per channel c: (value - mean[c]) / std[c].
inline ImageTensor normalize(const ImageTensor& img, const std::vector<double>& mean,
                             const std::vector<double>& stddev) {
  check_image(img, "normalize");
  if (static_cast<int>(mean.size()) != img.channels || static_cast<int>(stddev.size()) != img.channels)
    throw std::invalid_argument("normalize: stats size must match channel count");
  for (double s : stddev)
    if (!(s > 0.0)) throw std::invalid_argument("normalize: std components must be > 0");
  ImageTensor out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    double* p = out.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean[c]) / stddev[c];
  }
  return out;
}

inline ImageTensor denormalize(const ImageTensor& img, const std::vector<double>& mean,
                               const std::vector<double>& stddev) {
  check_image(img, "denormalize");
  ImageTensor out = img;
  const std::size_t plane = img.plane();
  for (int c = 0; c < img.channels; ++c) {
    double* p = out.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * stddev[c] + mean[c];
  }
  return out;
}

inline void normalize_in_place(LabeledDataset& ds, const ChannelStats& stats) {
  for (auto& item : ds.items) item.image = normalize(item.image, stats.mean, stats.stddev);
}

}  // namespace passband
