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

// Synthetic CIFAR-format dataset: each class is a fixed prototype carrying
// class identity in two separated frequency bands, and each sample is a
// shifted, brightness-jittered, noisy view of its prototype:
//
//   low band: a smooth random blob (white noise blurred at sigma 2.5), the
//             dominant energy, as in natural images;
//   mid band: a class-specific oriented sinusoid near 0.08-0.16 cyc/px.
//
// Nothing class-specific lives above the mid band, so aggressive high-pass
// filtering (small sigma) leaves no usable signal for any model, while
// moderate high-pass filtering and every low-pass cell keep partial class
// content. A model trained on clean images leans on the dominant low band
// and collapses across the high-pass grid; a model trained with stochastic
// filtering augmentation learns to read the surviving bands in isolation
// and recovers much of the filtered-grid accuracy. Useful for exercising
// the full pipeline when no real dataset is on disk.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "passband/dataset.hpp"
#include "passband/gaussian.hpp"
#include "passband/rng.hpp"

namespace passband {

struct SynthSpec {
  int num_classes = 10;
  int height = 32, width = 32, channels = 3;
  std::uint64_t seed = 1;
  double low_amp = 0.20;  // smooth blob RMS
  double mid_amp = 0.10;  // mid-band tone amplitude
  int max_shift = 2;
  double brightness = 0.05;
  double noise = 0.02;
};

inline std::uint64_t fnv_tag(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

inline ImageTensor standardized_band(int h, int w, int c, double sigma, Rng& rng) {
  ImageTensor img(h, w, c);
  for (double& v : img.data) v = rng.normal();
  const int width = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  img = filter_lowpass(img, sigma, width);
  const std::size_t plane = img.plane();
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0, sum_sq = 0.0;
    double* p = img.data.data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      sum += p[i];
      sum_sq += p[i] * p[i];
    }
    const double mean = sum / static_cast<double>(plane);
    const double rms = std::sqrt(std::max(sum_sq / plane - mean * mean, 1e-12));
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - mean) / rms;
  }
  return img;
}

}  // namespace detail

inline std::vector<ImageTensor> synth_prototypes(const SynthSpec& spec) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  constexpr double kGolden = 0.61803398874989484820;
  std::vector<ImageTensor> protos;
  protos.reserve(spec.num_classes);
  const double denom = std::max(spec.num_classes - 1, 1);
  for (int c = 0; c < spec.num_classes; ++c) {
    Rng rng = rng_at(mix_seed(spec.seed, 0x70726f746full), static_cast<std::uint64_t>(c));
    ImageTensor low = detail::standardized_band(spec.height, spec.width, spec.channels, 2.5, rng);
    // Mid-tone frequency (cycles/pixel) and orientation per class; the
    // golden-ratio stride spreads orientations without collisions.
    const double f_mid = 0.08 + 0.08 * (c / denom);
    const double theta_mid = kTwoPi * 0.5 * std::fmod(c * kGolden + 0.31, 1.0);
    ImageTensor proto(spec.height, spec.width, spec.channels, 0.5);
    for (int ch = 0; ch < spec.channels; ++ch) {
      const double phase_mid = rng.uniform(0.0, kTwoPi);
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const double um = f_mid * (x * std::cos(theta_mid) + y * std::sin(theta_mid));
          proto.at(ch, y, x) += spec.low_amp * low.at(ch, y, x) +
                                spec.mid_amp * std::sin(kTwoPi * um + phase_mid);
        }
    }
    protos.push_back(std::move(proto));
  }
  return protos;
}

/// Deterministic sample stream: item i of a given stream ("train", "test",
/// ...) is a function of (spec.seed, stream, i) only. Labels cycle through
/// the classes, so any prefix is nearly balanced.
inline LabeledDataset make_synthetic_dataset(const SynthSpec& spec, std::size_t count,
                                             const std::string& stream) {
  if (spec.num_classes < 2) throw std::invalid_argument("make_synthetic_dataset: need >= 2 classes");
  if (count == 0) throw std::invalid_argument("make_synthetic_dataset: count must be positive");
  const std::vector<ImageTensor> protos = synth_prototypes(spec);
  const std::uint64_t stream_seed = mix_seed(spec.seed, fnv_tag(stream));

  LabeledDataset ds;
  ds.num_classes = spec.num_classes;
  ds.name = "synth-" + stream;
  ds.items.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = rng_at(stream_seed, i);
    LabeledItem item;
    item.label = static_cast<int>(i % spec.num_classes);
    const ImageTensor& proto = protos[item.label];
    const int dy = static_cast<int>(rng.below(2 * spec.max_shift + 1)) - spec.max_shift;
    const int dx = static_cast<int>(rng.below(2 * spec.max_shift + 1)) - spec.max_shift;
    const double bright = rng.uniform(-spec.brightness, spec.brightness);
    item.image = ImageTensor(spec.height, spec.width, spec.channels);
    for (int c = 0; c < spec.channels; ++c)
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
          const int sy = std::clamp(y + dy, 0, spec.height - 1);
          const int sx = std::clamp(x + dx, 0, spec.width - 1);
          double v = proto.at(c, sy, sx) + bright + spec.noise * rng.normal();
          item.image.at(c, y, x) = std::clamp(v, 0.0, 1.0);
        }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

/// Writes `train_count` records across data_batch_1..5.bin plus a
/// test_batch.bin, so the directory loads exactly like the CIFAR-10 layout.
inline void write_synthetic_cifar_dir(const SynthSpec& spec, std::size_t train_count,
                                      std::size_t test_count, const std::string& dir) {
  namespace fs = std::filesystem;
  if (train_count < 5)
    throw std::invalid_argument("write_synthetic_cifar_dir: need at least 5 train records");
  fs::create_directories(dir);
  LabeledDataset train = make_synthetic_dataset(spec, train_count, "train");
  LabeledDataset test = make_synthetic_dataset(spec, test_count, "test");
  const std::size_t base = train_count / 5, extra = train_count % 5;
  std::size_t written = 0;
  for (int b = 1; b <= 5; ++b) {
    LabeledDataset part;
    part.num_classes = train.num_classes;
    const std::size_t n = base + (static_cast<std::size_t>(b) <= extra ? 1 : 0);
    part.items.assign(train.items.begin() + written, train.items.begin() + written + n);
    save_record_file((fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string(), part);
    written += n;
  }
  save_record_file((fs::path(dir) / "test_batch.bin").string(), test);
}

}  // namespace passband
