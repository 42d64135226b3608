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

#include <vector>

#include "passband/errors.hpp"
#include "passband/model.hpp"

namespace passband {

/// Momentum buffers, one per parameter tensor, aligned with the params list.
template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;

  void match(const std::vector<ParamRef<T>>& params) {
    if (velocity.size() == params.size()) return;
    velocity.clear();
    for (const auto& p : params) velocity.emplace_back(p.value->size(), T(0));
  }
};

/// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v.
/// Weight decay touches learnable parameters only; running statistics are
/// buffers and never reach the optimizer.
template <typename T>
void sgd_step(const std::vector<ParamRef<T>>& params, SgdState<T>& state, T lr, T momentum,
              T weight_decay) {
  state.match(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef<T>& p = params[i];
    if (!p.grad) continue;
    if (p.grad->size() != p.value->size())
      throw shape_error("sgd_step: grad/value size mismatch for " + p.name);
    std::vector<T>& v = state.velocity[i];
    T* value = p.value->data();
    const T* grad = p.grad->data();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = momentum * v[j] + (grad[j] + weight_decay * value[j]);
      value[j] -= lr * v[j];
    }
  }
}

}  // namespace passband
