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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgmd/errors.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd {

enum class Activation { kSigmoid, kTanh, kIdentity };

// Measuring-function family. Lives here because it also fixes the
// discriminator's output activation.
enum class ObjectiveKind { kJs, kWasserstein };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline std::string_view to_string(ObjectiveKind k) {
  return k == ObjectiveKind::kJs ? "js" : "wasserstein";
}

inline Activation discriminator_output(ObjectiveKind kind) {
  return kind == ObjectiveKind::kJs ? Activation::kSigmoid : Activation::kIdentity;
}

struct MlpSpec {
  // widths.front() is the input dimension, widths.back() the output.
  std::vector<std::size_t> widths;
  double leaky_alpha = 0.2;
  Activation output = Activation::kSigmoid;

  std::size_t layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }

  void validate() const {
    detail::require(widths.size() >= 2, "MlpSpec needs at least one layer");
    for (std::size_t w : widths) detail::require(w > 0, "MlpSpec widths must be positive");
  }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Layer tensors stored flat as [W1, b1, W2, b2, ...]; W_l is
// [widths[l-1] x widths[l]] and b_l is [widths[l]].
struct MlpParams {
  std::vector<Tensor> tensors;

  const Tensor& weight(std::size_t layer) const { return tensors.at(2 * layer); }
  const Tensor& bias(std::size_t layer) const { return tensors.at(2 * layer + 1); }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct NoisePrior {
  std::size_t latent_dim = 8;

  friend bool operator==(const NoisePrior&, const NoisePrior&) = default;
};

// He-scaled normal weights, zero biases.
inline MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  MlpParams p;
  for (std::size_t l = 1; l < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l - 1];
    const std::size_t fan_out = spec.widths[l];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor w({fan_in, fan_out});
    for (double& v : w.data()) v = stddev * rng.normal();
    p.tensors.push_back(std::move(w));
    p.tensors.emplace_back(Shape{fan_out}, 0.0);
  }
  return p;
}

inline MlpParams zero_params(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t l = 1; l < spec.widths.size(); ++l) {
    p.tensors.emplace_back(Shape{spec.widths[l - 1], spec.widths[l]}, 0.0);
    p.tensors.emplace_back(Shape{spec.widths[l]}, 0.0);
  }
  return p;
}

inline void check_params(const MlpSpec& spec, const MlpParams& params) {
  if (params.tensors.size() != 2 * spec.layers()) {
    throw DimensionError("parameter count does not match MlpSpec");
  }
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    if (params.weight(l).shape() != Shape{spec.widths[l], spec.widths[l + 1]} ||
        params.bias(l).shape() != Shape{spec.widths[l + 1]}) {
      throw DimensionError("layer " + std::to_string(l) + " shape does not match MlpSpec");
    }
  }
}

// Puts each parameter tensor on the tape, as a differentiable leaf or a
// constant.
inline std::vector<NodeId> put_params(Tape& tape, const MlpParams& params, bool trainable) {
  std::vector<NodeId> ids;
  ids.reserve(params.tensors.size());
  for (const Tensor& t : params.tensors) {
    ids.push_back(trainable ? tape.parameter(t) : tape.constant(t));
  }
  return ids;
}

inline NodeId apply_activation(Tape& tape, NodeId x, Activation a) {
  switch (a) {
    case Activation::kSigmoid: return tape.sigmoid(x);
    case Activation::kTanh: return tape.tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// Leaky-ReLU hidden layers, `output` on the last layer.
inline NodeId mlp_on_tape(Tape& tape, const MlpSpec& spec, std::span<const NodeId> params,
                          NodeId x, Activation output) {
  const Tensor& in = tape.value(x);
  if (in.rank() != 2 || in.cols() != spec.input_dim()) {
    throw ContractError("MLP input has shape " + shape_str(in.shape()) + ", expected [b x " +
                        std::to_string(spec.input_dim()) + "]");
  }
  NodeId h = x;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    h = tape.row_broadcast_add(tape.matmul(h, params[2 * l]), params[2 * l + 1]);
    h = (l + 1 < spec.layers()) ? tape.leaky_relu(h, spec.leaky_alpha)
                                : apply_activation(tape, h, output);
  }
  return h;
}

inline Tensor mlp_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& x,
                          Activation output) {
  check_params(spec, params);
  Tape tape;
  const auto ids = put_params(tape, params, false);
  const NodeId in = tape.constant(x);
  return tape.value(mlp_on_tape(tape, spec, ids, in, output));
}

inline Tensor generator_forward(const MlpSpec& spec, const MlpParams& params, const Tensor& z) {
  return mlp_forward(spec, params, z, spec.output);
}

// One score per row: a probability in JS mode, an unbounded critic value in
// Wasserstein mode.
inline std::vector<double> discriminator_forward(const MlpSpec& spec, const MlpParams& params,
                                                 const Tensor& x, ObjectiveKind kind) {
  detail::require(spec.output_dim() == 1, "discriminator must have a single output");
  return mlp_forward(spec, params, x, discriminator_output(kind)).values();
}

inline Tensor sample_noise(const NoisePrior& prior, std::size_t rows, Rng& rng) {
  detail::require(prior.latent_dim >= 1, "latent dimension must be >= 1");
  Tensor z({rows, prior.latent_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

struct EnsembleSample {
  Tensor samples;
  // Index of the generator that produced each row.
  std::vector<std::size_t> source;
};

// Mixture sampling: each row picks a generator uniformly, then draws its own
// latent vector. Generator choices and latent vectors come from separate
// substreams of `seed`, so the latent stream does not depend on k.
inline EnsembleSample sample_ensemble(const MlpSpec& spec, std::span<const MlpParams> generators,
                                      const NoisePrior& prior, std::size_t n,
                                      std::uint64_t seed) {
  if (generators.empty()) throw ContractError("sample_ensemble: no generators");
  detail::require(spec.input_dim() == prior.latent_dim,
                  "generator input width must equal the latent dimension");
  Rng pick(Rng::derive(seed, 0));
  Rng noise(Rng::derive(seed, 1));
  EnsembleSample out;
  out.source.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.source[i] = pick.index(generators.size());
  const Tensor z = sample_noise(prior, n, noise);

  out.samples = Tensor({n, spec.output_dim()});
  std::vector<std::vector<std::size_t>> rows(generators.size());
  for (std::size_t i = 0; i < n; ++i) rows[out.source[i]].push_back(i);
  for (std::size_t g = 0; g < generators.size(); ++g) {
    if (rows[g].empty()) continue;
    const Tensor x = generator_forward(spec, generators[g], z.gather_rows(rows[g]));
    for (std::size_t r = 0; r < rows[g].size(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) out.samples.at(rows[g][r], c) = x.at(r, c);
    }
  }
  return out;
}

inline Tensor sample_generator(const MlpSpec& spec, const MlpParams& generator,
                               const NoisePrior& prior, std::size_t n, std::uint64_t seed) {
  return sample_ensemble(spec, std::span(&generator, 1), prior, n, seed).samples;
}

}  // namespace mgmd
