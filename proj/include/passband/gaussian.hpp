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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "passband/image.hpp"

namespace passband {

/// Normalized 1-D Gaussian tap set. Taps always sum to 1 and are symmetric
/// about the kernel center (an integer index for odd widths, a half-integer
/// position for even widths).
struct Kernel1D {
  std::vector<double> taps;
  double sigma = 0.0;

  int width() const { return static_cast<int>(taps.size()); }
};

/// Samples exp(-x^2 / (2 sigma^2)) at offsets x = i - (width-1)/2 and
/// normalizes to unit sum. Even widths sample at half-integer offsets.
inline Kernel1D gaussian_kernel(double sigma, int width) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
  if (width < 1) throw std::invalid_argument("gaussian_kernel: width must be >= 1");
  Kernel1D k;
  k.sigma = sigma;
  k.taps.resize(width);
  const double center = (width - 1) / 2.0;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  double sum = 0.0;
  for (int i = 0; i < width; ++i) {
    const double x = i - center;
    // Floor the exponent so extreme (sigma, width) pairs keep strictly
    // positive taps instead of underflowing to zero.
    k.taps[i] = std::exp(std::max(-x * x * inv_two_sigma_sq, -700.0));
    sum += k.taps[i];
  }
  for (double& t : k.taps) t /= sum;
  return k;
}

enum class FilterKind { HighPass, LowPass };

inline const char* to_string(FilterKind k) {
  return k == FilterKind::HighPass ? "HighPass" : "LowPass";
}

inline FilterKind filter_kind_from_string(const std::string& s) {
  if (s == "HighPass" || s == "highpass" || s == "high") return FilterKind::HighPass;
  if (s == "LowPass" || s == "lowpass" || s == "low") return FilterKind::LowPass;
  throw std::invalid_argument("unknown filter kind: " + s);
}

/// One cell of the filtering grid: which pass, kernel sigma, kernel width.
struct FilterSpec {
  FilterKind kind = FilterKind::LowPass;
  double sigma = 1.0;
  int width = 3;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("FilterSpec: sigma must be > 0");
    if (width < 1) throw std::invalid_argument("FilterSpec: width must be >= 1");
  }
};

enum class Axis { Rows, Cols };

/// Extends `img` along one axis by repeating the edge row/column.
inline ImageTensor pad_replicate(const ImageTensor& img, int before, int after, Axis axis) {
  check_image(img, "pad_replicate");
  if (before < 0 || after < 0)
    throw std::invalid_argument("pad_replicate: negative padding");
  const int h = axis == Axis::Rows ? img.height + before + after : img.height;
  const int w = axis == Axis::Cols ? img.width + before + after : img.width;
  ImageTensor out(h, w, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      int sy = axis == Axis::Rows ? std::min(std::max(y - before, 0), img.height - 1) : y;
      for (int x = 0; x < w; ++x) {
        int sx = axis == Axis::Cols ? std::min(std::max(x - before, 0), img.width - 1) : x;
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  }
  return out;
}

/// Applies `kernel` along columns then rows, per channel, with replicate
/// padding of floor((width-1)/2) before and ceil((width-1)/2) after on each
/// axis; output dimensions equal input dimensions. Equivalent to a full 2-D
/// convolution with the kernel's outer product.
inline ImageTensor convolve_separable(const ImageTensor& img, const Kernel1D& kernel) {
  check_image(img, "convolve_separable");
  const int w = kernel.width();
  if (w < 1) throw std::invalid_argument("convolve_separable: empty kernel");
  const int before = (w - 1) / 2;
  const int after = w / 2;

  // Vertical pass.
  ImageTensor padded = pad_replicate(img, before, after, Axis::Rows);
  ImageTensor mid(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < w; ++i) acc += kernel.taps[i] * padded.at(c, y + i, x);
        mid.at(c, y, x) = acc;
      }

  // Horizontal pass.
  ImageTensor padded2 = pad_replicate(mid, before, after, Axis::Cols);
  ImageTensor out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < w; ++i) acc += kernel.taps[i] * padded2.at(c, y, x + i);
        out.at(c, y, x) = acc;
      }
  return out;
}

/// Gaussian blur: retains the smooth, low-frequency content.
inline ImageTensor filter_lowpass(const ImageTensor& img, double sigma, int width) {
  return convolve_separable(img, gaussian_kernel(sigma, width));
}

/// Complement of the blur: img minus its low-pass version. Output is signed;
/// low-pass plus high-pass reconstructs the input exactly.
inline ImageTensor filter_highpass(const ImageTensor& img, double sigma, int width) {
  ImageTensor low = filter_lowpass(img, sigma, width);
  ImageTensor out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= low.data[i];
  return out;
}

inline ImageTensor apply_filter(const ImageTensor& img, const FilterSpec& spec) {
  spec.validate();
  return spec.kind == FilterKind::LowPass ? filter_lowpass(img, spec.sigma, spec.width)
                                          : filter_highpass(img, spec.sigma, spec.width);
}

}  // namespace passband
