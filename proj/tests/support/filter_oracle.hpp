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

// Brute-force reference implementations used only to check the library.
// They deliberately share no code with the separable filtering path.

#include "passband/gaussian.hpp"
#include "passband/image.hpp"
#include "passband/rng.hpp"

namespace passband::testing {

// Full 2-D convolution with the outer product taps[i]*taps[j], computed over
// an image padded on both axes with replicated edges (corners replicate the
// corner pixel).
inline ImageTensor brute_force_conv2d(const ImageTensor& img, const Kernel1D& kernel) {
  const int w = kernel.width();
  const int before = (w - 1) / 2;
  ImageTensor out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int i = 0; i < w; ++i)
          for (int j = 0; j < w; ++j) {
            int sy = y + i - before;
            int sx = x + j - before;
            sy = sy < 0 ? 0 : (sy >= img.height ? img.height - 1 : sy);
            sx = sx < 0 ? 0 : (sx >= img.width ? img.width - 1 : sx);
            acc += kernel.taps[i] * kernel.taps[j] * img.at(c, sy, sx);
          }
        out.at(c, y, x) = acc;
      }
  return out;
}

inline ImageTensor random_image(int h, int w, int c, Rng& rng, double lo = 0.0, double hi = 1.0) {
  ImageTensor img(h, w, c);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

// Sum of absolute horizontal plus vertical pixel differences.
inline double total_variation(const ImageTensor& img) {
  double tv = 0.0;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x + 1 < img.width; ++x)
        tv += std::abs(img.at(c, y, x + 1) - img.at(c, y, x));
    for (int y = 0; y + 1 < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        tv += std::abs(img.at(c, y + 1, x) - img.at(c, y, x));
  }
  return tv;
}

inline double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace passband::testing
