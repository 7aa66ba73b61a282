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
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd {

enum class GeneratorMode { kMinimax, kNonSaturating };

// Which discriminators a generator is scored against: its own pair's, or all
// k of them.
enum class Coupling { kOwn, kAll };

inline std::string_view to_string(GeneratorMode m) {
  return m == GeneratorMode::kMinimax ? "minimax" : "non_saturating";
}
inline std::string_view to_string(Coupling c) { return c == Coupling::kOwn ? "own" : "all"; }

struct Objective {
  ObjectiveKind kind = ObjectiveKind::kJs;
  GeneratorMode generator_mode = GeneratorMode::kNonSaturating;
  Coupling coupling = Coupling::kOwn;

  static Objective js() { return {ObjectiveKind::kJs, GeneratorMode::kNonSaturating, Coupling::kOwn}; }
  static Objective wasserstein() {
    return {ObjectiveKind::kWasserstein, GeneratorMode::kMinimax, Coupling::kOwn};
  }

  friend bool operator==(const Objective&, const Objective&) = default;
};

// Measuring function: log (clamped) for JS, identity for Wasserstein.
inline double phi(ObjectiveKind kind, double v) {
  return kind == ObjectiveKind::kJs ? std::log(std::max(v, kLogFloor)) : v;
}

namespace detail {

inline double mean_of(std::span<const double> values) {
  require(!values.empty(), "empty batch");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double mean_phi(ObjectiveKind kind, std::span<const double> scores) {
  require(!scores.empty(), "empty batch");
  double sum = 0.0;
  for (double s : scores) sum += phi(kind, s);
  return sum / static_cast<double>(scores.size());
}

inline double mean_phi_complement(ObjectiveKind kind, std::span<const double> scores) {
  require(!scores.empty(), "empty batch");
  double sum = 0.0;
  for (double s : scores) sum += phi(kind, 1.0 - s);
  return sum / static_cast<double>(scores.size());
}

}  // namespace detail

// Discriminator objective to be maximized:
//   mean_real phi(D(x)) + mean_fake phi(1 - D(G(z))).
inline double discriminator_loss(ObjectiveKind kind, std::span<const double> real_scores,
                                 std::span<const double> fake_scores) {
  return detail::mean_phi(kind, real_scores) + detail::mean_phi_complement(kind, fake_scores);
}

inline double discriminator_loss(ObjectiveKind kind, const MlpSpec& disc_spec,
                                 const MlpParams& disc, const Tensor& real_batch,
                                 const Tensor& fake_batch) {
  const auto real = discriminator_forward(disc_spec, disc, real_batch, kind);
  const auto fake = discriminator_forward(disc_spec, disc, fake_batch, kind);
  return discriminator_loss(kind, real, fake);
}

// Single-pair min-max value; by definition the k = 1 discriminator loss.
inline double value_function(ObjectiveKind kind, const MlpSpec& gen_spec, const MlpParams& gen,
                             const MlpSpec& disc_spec, const MlpParams& disc,
                             const Tensor& real_batch, const Tensor& noise_batch) {
  const Tensor fake = generator_forward(gen_spec, gen, noise_batch);
  return discriminator_loss(kind, disc_spec, disc, real_batch, fake);
}

struct GeneratorLoss {
  // (1/k) * sum over coupled j of mean phi(1 - D_j(G_i(z))).
  double value = 0.0;
  // The quantity gradient descent minimizes; equals `value` except in
  // non-saturating mode.
  double surrogate = 0.0;
};

namespace detail {

inline double generator_term(const Objective& obj, std::span<const double> fake_scores) {
  if (obj.generator_mode == GeneratorMode::kMinimax) {
    return mean_phi_complement(obj.kind, fake_scores);
  }
  return -mean_phi(obj.kind, fake_scores);
}

}  // namespace detail

// Generator loss for generator i. `k` is the number of generator/
// discriminator pairs and supplies the 1/k factor. With Coupling::kOwn only
// discriminators[i] is used; with kAll every discriminator contributes.
inline GeneratorLoss generator_loss(const Objective& obj, const MlpSpec& gen_spec,
                                    std::span<const MlpParams> generators,
                                    const MlpSpec& disc_spec,
                                    std::span<const MlpParams> discriminators, std::size_t i,
                                    const Tensor& noise_batch) {
  if (i >= generators.size() || i >= discriminators.size()) {
    throw ContractError("generator_loss: index " + std::to_string(i) + " out of range");
  }
  const double k = static_cast<double>(discriminators.size());
  const Tensor fake = generator_forward(gen_spec, generators[i], noise_batch);
  GeneratorLoss out;
  auto add = [&](const MlpParams& d) {
    const auto scores = discriminator_forward(disc_spec, d, fake, obj.kind);
    out.value += detail::mean_phi_complement(obj.kind, scores);
    out.surrogate += detail::generator_term(obj, scores);
  };
  if (obj.coupling == Coupling::kOwn) {
    add(discriminators[i]);
  } else {
    for (const MlpParams& d : discriminators) add(d);
  }
  out.value /= k;
  out.surrogate /= k;
  return out;
}

// ---------------------------------------------------------------------------
// Tape builders used by the trainer. Each returns a scalar node to MINIMIZE.

// -(mean phi(D(real)) + mean phi(1 - D(fake))).
inline NodeId discriminator_descent_node(Tape& tape, ObjectiveKind kind, const MlpSpec& spec,
                                         std::span<const NodeId> disc, NodeId real,
                                         NodeId fake) {
  const Activation out = discriminator_output(kind);
  const NodeId d_real = mlp_on_tape(tape, spec, disc, real, out);
  const NodeId d_fake = mlp_on_tape(tape, spec, disc, fake, out);
  const NodeId ones = tape.constant(Tensor(tape.value(d_fake).shape(), 1.0));
  const NodeId comp = tape.sub(ones, d_fake);
  NodeId real_term, fake_term;
  if (kind == ObjectiveKind::kJs) {
    real_term = tape.mean(tape.log(d_real));
    fake_term = tape.mean(tape.log(comp));
  } else {
    real_term = tape.mean(d_real);
    fake_term = tape.mean(comp);
  }
  return tape.mul_scalar(tape.add(real_term, fake_term), -1.0);
}

// Generator surrogate against one discriminator, before the 1/k factor.
inline NodeId generator_term_node(Tape& tape, const Objective& obj, const MlpSpec& spec,
                                  std::span<const NodeId> disc, NodeId fake) {
  const NodeId d_fake = mlp_on_tape(tape, spec, disc, fake, discriminator_output(obj.kind));
  if (obj.generator_mode == GeneratorMode::kMinimax) {
    const NodeId ones = tape.constant(Tensor(tape.value(d_fake).shape(), 1.0));
    const NodeId comp = tape.sub(ones, d_fake);
    return obj.kind == ObjectiveKind::kJs ? tape.mean(tape.log(comp)) : tape.mean(comp);
  }
  const NodeId s = obj.kind == ObjectiveKind::kJs ? tape.mean(tape.log(d_fake)) : tape.mean(d_fake);
  return tape.mul_scalar(s, -1.0);
}

}  // namespace mgmd
