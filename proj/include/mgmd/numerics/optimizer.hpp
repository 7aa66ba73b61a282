// Copyright 2026 The mgmd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgmd/errors.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const OptimizerSettings&, const OptimizerSettings&) = default;
};

// Per-network optimizer state. Moment buffers are shaped on the first step
// and must match the parameter shapes afterwards.
struct OptimizerState {
  OptimizerSettings settings;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  OptimizerState() = default;
  explicit OptimizerState(OptimizerSettings s) : settings(s) {}
};

inline void optimizer_step(OptimizerState& state, std::span<Tensor> params,
                           std::span<const Tensor> grads) {
  const OptimizerSettings& s = state.settings;
  if (!(s.learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (params.size() != grads.size()) {
    throw ContractError("optimizer_step: " + std::to_string(params.size()) +
                        " parameters but " + std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw ContractError("optimizer_step: gradient " + std::to_string(i) + " has shape " +
                          shape_str(grads[i].shape()) + ", parameter has " +
                          shape_str(params[i].shape()));
    }
  }

  if (s.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].size(); ++j) {
        params[i][j] -= s.learning_rate * grads[i][j];
      }
    }
    ++state.step;
    return;
  }

  if (state.step == 0 && state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.emplace_back(p.shape(), 0.0);
      state.second_moment.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractError("optimizer_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].shape() != params[i].shape()) {
      throw ContractError("optimizer_step: moment shape mismatch for parameter " +
                          std::to_string(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(s.beta1, t);
  const double bias2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g;
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      params[i][j] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  }
}

// WGAN critic constraint: every entry clamped into [-c, c].
inline void clip_weights(std::span<Tensor> params, double c) {
  if (!(c > 0.0)) throw ContractError("clip_weights requires c > 0");
  for (Tensor& p : params) {
    for (double& v : p.data()) v = std::clamp(v, -c, c);
  }
}

}  // namespace mgmd
