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
#include <cstddef>
#include <string>
#include <vector>

#include "passband/errors.hpp"

namespace passband {

/// Dense NCHW tensor. float for training, double for gradient checking.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0)) : n(n_), c(c_), h(h_), w(w_) {
    if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
      throw shape_error("Tensor4: dimensions must be positive");
    data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill);
  }

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

  std::size_t index(int ni, int ci, int y, int x) const {
    return ((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x;
  }
  T& at(int ni, int ci, int y, int x) { return data[index(ni, ci, y, x)]; }
  T at(int ni, int ci, int y, int x) const { return data[index(ni, ci, y, x)]; }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_string() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename T>
bool all_finite(const Tensor4<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace passband
