// Copyright 2026 The msim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "msim/errors.hpp"
#include "msim/tensor.hpp"

namespace msim {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(const std::vector<const Tensor*>& params, double lr,
            double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : learning_rate(lr), beta1(b1), beta2(b2), epsilon(eps) {
    for (const Tensor* p : params) {
      first_moment.emplace_back(p->shape());
      second_moment.emplace_back(p->shape());
    }
  }
};

/// One bias-corrected Adam update, in place. Gradients are validated before
/// anything is modified, so a divergence error leaves params and state intact.
inline void adam_step(const std::vector<Tensor*>& params,
                      const std::vector<const Tensor*>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k]->shape() ||
        params[k]->shape() != state.first_moment[k].shape()) {
      throw DimensionError("adam_step: shape mismatch for parameter " +
                           std::to_string(k) + ": " +
                           shape_str(params[k]->shape()) + " vs grad " +
                           shape_str(grads[k]->shape()));
    }
    if (!grads[k]->all_finite()) {
      throw DivergenceError("non-finite gradient in parameter " +
                            std::to_string(k) + " at step " +
                            std::to_string(state.step + 1));
    }
  }

  const std::uint64_t t = ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    auto g = grads[k]->data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace msim
