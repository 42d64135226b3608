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
#include <cstdint>
#include <string>
#include <vector>

#include "passband/errors.hpp"

namespace passband {

/// H x W x C image with one double per sample, stored as channel planes,
/// each plane row-major. Channel values are nominally in [0, 1] before
/// normalization; high-pass output is signed.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c) {
    if (h <= 0 || w <= 0 || c <= 0)
      throw std::invalid_argument("ImageTensor: dimensions must be positive");
    data.assign(static_cast<std::size_t>(h) * w * c, fill);
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return data.size(); }

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double& at(int c, int y, int x) { return data[index(c, y, x)]; }
  double at(int c, int y, int x) const { return data[index(c, y, x)]; }

  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

inline bool all_finite(const ImageTensor& img) {
  for (double v : img.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline void check_image(const ImageTensor& img, const char* where) {
  if (img.height <= 0 || img.width <= 0 || img.channels <= 0 ||
      img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
    throw shape_error(std::string(where) + ": malformed image");
}

/// 8-bit companion of ImageTensor, same plane layout.
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;

  ImageU8() = default;
  ImageU8(int h, int w, int c) : height(h), width(w), channels(c) {
    data.assign(static_cast<std::size_t>(h) * w * c, 0);
  }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
};

inline std::uint8_t quantize_unit_u8(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

/// 8-bit rendering. Unsigned mode maps [0,1] -> [0,255] with clamping.
/// Signed mode maps v -> clamp(v*0.5 + 0.5) so that zero renders mid-grey;
/// this is the display convention for high-pass output.
inline ImageU8 to_display_u8(const ImageTensor& img, bool signed_mode) {
  check_image(img, "to_display_u8");
  ImageU8 out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    double v = img.data[i];
    if (signed_mode) v = v * 0.5 + 0.5;
    out.data[i] = quantize_unit_u8(v);
  }
  return out;
}

}  // namespace passband
