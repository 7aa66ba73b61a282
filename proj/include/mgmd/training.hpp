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
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgmd/data.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "mgmd/numerics/optimizer.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/objectives.hpp"

namespace mgmd {

enum class Method { kMgmd, kClassic, kParGan };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kMgmd: return "mgmd";
    case Method::kClassic: return "classic";
    case Method::kParGan: return "pargan";
  }
  return "?";
}

struct TrainConfig {
  Method method = Method::kMgmd;
  std::size_t k = 2;
  std::size_t epochs = 1500;
  std::size_t batch_size = 64;
  Objective objective = Objective::js();
  OptimizerSettings optimizer;
  std::size_t d_steps_per_g_step = 1;
  // Critic weight bound; used only in Wasserstein mode.
  double clip_c = 0.01;
  std::uint64_t seed = 0;
  // Epochs between periodic checkpoints; 0 disables them.
  std::size_t checkpoint_interval = 0;
  MlpSpec generator{{8, 32, 32, 2}, 0.2, Activation::kSigmoid};
  MlpSpec discriminator{{2, 32, 32, 1}, 0.2, Activation::kSigmoid};
  NoisePrior prior{8};
  bool stratified = false;
  // Train pairs on worker threads. Does not change results.
  bool parallel = false;

  std::size_t pair_count() const { return method == Method::kClassic ? 1 : k; }

  void validate() const {
    detail::require(k >= 1, "k must be >= 1");
    detail::require(method != Method::kClassic || k == 1, "classic training requires k == 1");
    detail::require(method != Method::kParGan || k >= 2, "pargan training requires k >= 2");
    detail::require(epochs >= 1, "epochs must be >= 1");
    detail::require(batch_size >= 1, "batch_size must be >= 1");
    detail::require(d_steps_per_g_step >= 1, "d_steps_per_g_step must be >= 1");
    detail::require(optimizer.learning_rate > 0.0, "learning_rate must be > 0");
    detail::require(objective.kind != ObjectiveKind::kWasserstein || clip_c > 0.0,
                    "clip_c must be > 0");
    generator.validate();
    discriminator.validate();
    detail::require(generator.input_dim() == prior.latent_dim,
                    "generator input width must equal latent_dim");
    detail::require(generator.output_dim() == discriminator.input_dim(),
                    "generator output width must equal discriminator input width");
    detail::require(discriminator.output_dim() == 1, "discriminator output width must be 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Per-epoch means of the logged objectives. Indexed by discriminator for
// d_loss and by generator for g_loss / g_surrogate.
struct EpochLosses {
  std::vector<double> d_loss;
  std::vector<double> g_loss;
  std::vector<double> g_surrogate;

  friend bool operator==(const EpochLosses&, const EpochLosses&) = default;
};

struct TrainedModel {
  Method method = Method::kMgmd;
  TrainConfig config;
  std::vector<MlpParams> generators;
  std::vector<MlpParams> discriminators;
  PartitionSet partitions;
  std::vector<EpochLosses> history;
  // Opaque echo of the run configuration that produced this model.
  std::string config_echo;

  const Objective& objective() const { return config.objective; }

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;
};

enum class Phase { kCritic, kGenerator };

struct StepEvent {
  std::size_t epoch = 0;
  // Pair index for mgmd/classic; discriminator index (critic phase) for
  // pargan, whose generator phase reports pair 0.
  std::size_t pair = 0;
  std::size_t step = 0;
  Phase phase = Phase::kCritic;
  // Ids of the real samples in the critic batch; empty in generator phase.
  std::span<const std::uint64_t> real_ids;
  const MlpParams* generator = nullptr;
  const MlpParams* discriminator = nullptr;
};

// Instrumentation hooks. Setting on_step forces sequential execution.
struct TrainObserver {
  std::function<void(const StepEvent&)> on_step;
  std::function<void(std::size_t epoch, const TrainedModel&)> on_epoch_end;
};

namespace detail {

// Substream tags under the master seed.
inline constexpr std::uint64_t kPartitionStream = 0x5041525449ULL;
inline constexpr std::uint64_t kGenInitStream = 1000;
inline constexpr std::uint64_t kDiscInitStream = 2000;
inline constexpr std::uint64_t kPairStream = 3000;
inline constexpr std::uint64_t kSharedGenStream = 4000;

// Walks a partition in reshuffled passes; the last batch of a pass may be
// short, so ceil(n / b) draws cover the partition exactly once.
class BatchCursor {
 public:
  BatchCursor() = default;
  explicit BatchCursor(std::vector<std::size_t> indices) : order_(std::move(indices)) {}

  std::vector<std::size_t> next(std::size_t batch, Rng& rng) {
    if (pos_ == 0) rng.shuffle(std::span(order_));
    const std::size_t take = std::min(batch, order_.size() - pos_);
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(pos_ + take));
    pos_ += take;
    if (pos_ == order_.size()) pos_ = 0;
    return out;
  }

  std::size_t size() const { return order_.size(); }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct Critic {
  MlpParams params;
  OptimizerState opt;
  BatchCursor cursor;
  Rng rng{0};
};

struct Actor {
  MlpParams params;
  OptimizerState opt;
  Rng rng{0};
};

struct Accum {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

inline std::vector<std::uint64_t> ids_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<std::uint64_t> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data.ids[i]);
  return out;
}

// One ascent step on the discriminator objective. Returns its value before
// the update.
inline double critic_step(const TrainConfig& cfg, const Dataset& data, Critic& critic,
                          const MlpParams& generator, const TrainObserver* obs,
                          StepEvent event) {
  const auto idx = critic.cursor.next(cfg.batch_size, critic.rng);
  const Tensor real = data.samples.gather_rows(idx);
  const Tensor z = sample_noise(cfg.prior, idx.size(), critic.rng);
  const Tensor fake = generator_forward(cfg.generator, generator, z);

  Tape tape;
  const auto disc = put_params(tape, critic.params, true);
  const NodeId real_node = tape.constant(real);
  const NodeId fake_node = tape.constant(fake);
  const NodeId loss = discriminator_descent_node(tape, cfg.objective.kind, cfg.discriminator,
                                                 disc, real_node, fake_node);
  const double value = -tape.value(loss).item();
  const auto grads = tape.backward(loss);
  optimizer_step(critic.opt, critic.params.tensors, grads);
  if (cfg.objective.kind == ObjectiveKind::kWasserstein) {
    clip_weights(critic.params.tensors, cfg.clip_c);
  }
  if (obs && obs->on_step) {
    const auto ids = ids_of(data, idx);
    event.phase = Phase::kCritic;
    event.real_ids = ids;
    event.generator = &generator;
    event.discriminator = &critic.params;
    obs->on_step(event);
  }
  return value;
}

struct GeneratorStepResult {
  double value = 0.0;
  double surrogate = 0.0;
};

// One descent step for `actor` against `critics`, scaled by 1/k.
inline GeneratorStepResult generator_step(const TrainConfig& cfg, Actor& actor, Rng& rng,
                                          std::span<const MlpParams* const> critics,
                                          double k, std::size_t rows) {
  const Tensor z = sample_noise(cfg.prior, rows, rng);
  Tape tape;
  const auto gen = put_params(tape, actor.params, true);
  const NodeId fake =
      mlp_on_tape(tape, cfg.generator, gen, tape.constant(z), cfg.generator.output);
  GeneratorStepResult result;
  NodeId total{};
  bool first = true;
  for (const MlpParams* critic : critics) {
    const auto disc = put_params(tape, *critic, false);
    const NodeId term = generator_term_node(tape, cfg.objective, cfg.discriminator, disc, fake);
    total = first ? term : tape.add(total, term);
    first = false;
  }
  const NodeId loss = tape.mul_scalar(total, 1.0 / k);
  result.surrogate = tape.value(loss).item();
  if (cfg.objective.generator_mode == GeneratorMode::kMinimax) {
    result.value = result.surrogate;
  } else {
    const Tensor& x = tape.value(fake);
    for (const MlpParams* critic : critics) {
      const auto scores = discriminator_forward(cfg.discriminator, *critic, x, cfg.objective.kind);
      result.value += mean_phi_complement(cfg.objective.kind, scores);
    }
    result.value /= k;
  }
  const auto grads = tape.backward(loss);
  optimizer_step(actor.opt, actor.params.tensors, grads);
  return result;
}

inline std::size_t steps_for(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

template <typename F>
decltype(auto) with_context(std::size_t epoch, std::size_t pair, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError("epoch " + std::to_string(epoch) + ", pair " + std::to_string(pair) +
                       ": " + e.what());
  }
}

inline PartitionSet make_partitions(const Dataset& train, const TrainConfig& cfg) {
  const std::uint64_t seed = Rng::derive(cfg.seed, kPartitionStream);
  return cfg.stratified ? partition_stratified(train, cfg.k, seed)
                        : partition(train, cfg.k, seed);
}

inline void check_data(const Dataset& train, const TrainConfig& cfg) {
  cfg.validate();
  detail::require(train.size() >= 1, "empty training set");
  detail::require(cfg.k <= train.size(), "k exceeds the number of training samples");
  detail::require(train.dim() == cfg.discriminator.input_dim(),
                  "data dimension does not match the discriminator input width");
}

// K independent pairs; shared by mgmd and classic.
inline TrainedModel train_pairs(const Dataset& train, const TrainConfig& cfg,
                                const TrainObserver* obs) {
  check_data(train, cfg);
  const std::size_t k = cfg.pair_count();
  TrainedModel model;
  model.method = cfg.method;
  model.config = cfg;
  model.partitions = make_partitions(train, cfg);

  std::vector<Actor> actors(k);
  std::vector<Critic> critics(k);
  for (std::size_t i = 0; i < k; ++i) {
    actors[i].params = init_params(cfg.generator, Rng::derive(cfg.seed, kGenInitStream + i));
    actors[i].opt = OptimizerState(cfg.optimizer);
    critics[i].params = init_params(cfg.discriminator, Rng::derive(cfg.seed, kDiscInitStream + i));
    critics[i].opt = OptimizerState(cfg.optimizer);
    critics[i].cursor = BatchCursor(model.partitions.parts[i]);
    // One stream per pair feeds its batches and both noise draws.
    critics[i].rng = Rng(Rng::derive(cfg.seed, kPairStream + i));
  }

  const bool all = cfg.objective.coupling == Coupling::kAll;
  const bool threaded = cfg.parallel && k > 1 && !(obs && obs->on_step);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Other pairs' discriminators are seen as of the start of the epoch.
    std::vector<MlpParams> snapshot;
    if (all) {
      for (const auto& c : critics) snapshot.push_back(c.params);
    }
    EpochLosses losses;
    losses.d_loss.assign(k, 0.0);
    losses.g_loss.assign(k, 0.0);
    losses.g_surrogate.assign(k, 0.0);

    auto run_pair = [&](std::size_t i) {
      with_context(epoch, i, [&] {
        Critic& critic = critics[i];
        Actor& actor = actors[i];
        Accum d_acc, g_acc, s_acc;
        const std::size_t steps = steps_for(critic.cursor.size(), cfg.batch_size);
        const std::size_t rows = std::min(cfg.batch_size, critic.cursor.size());
        for (std::size_t step = 0; step < steps; ++step) {
          StepEvent ev{epoch, i, step, Phase::kCritic, {}, nullptr, nullptr};
          for (std::size_t d = 0; d < cfg.d_steps_per_g_step; ++d) {
            d_acc.add(critic_step(cfg, train, critic, actor.params, obs, ev));
          }
          std::vector<const MlpParams*> against;
          if (all) {
            for (std::size_t j = 0; j < k; ++j) {
              against.push_back(j == i ? &critic.params : &snapshot[j]);
            }
          } else {
            against.push_back(&critic.params);
          }
          // Generator noise shares the pair stream.
          const auto g =
              generator_step(cfg, actor, critic.rng, against, static_cast<double>(k), rows);
          g_acc.add(g.value);
          s_acc.add(g.surrogate);
          if (obs && obs->on_step) {
            ev.phase = Phase::kGenerator;
            ev.generator = &actor.params;
            ev.discriminator = &critic.params;
            obs->on_step(ev);
          }
        }
        losses.d_loss[i] = d_acc.mean();
        losses.g_loss[i] = g_acc.mean();
        losses.g_surrogate[i] = s_acc.mean();
      });
    };

    if (threaded) {
      std::vector<std::future<void>> jobs;
      for (std::size_t i = 0; i < k; ++i) {
        jobs.push_back(std::async(std::launch::async, run_pair, i));
      }
      for (auto& j : jobs) j.get();
    } else {
      for (std::size_t i = 0; i < k; ++i) run_pair(i);
    }
    model.history.push_back(std::move(losses));

    if (obs && obs->on_epoch_end) {
      model.generators.clear();
      model.discriminators.clear();
      for (std::size_t i = 0; i < k; ++i) {
        model.generators.push_back(actors[i].params);
        model.discriminators.push_back(critics[i].params);
      }
      obs->on_epoch_end(epoch, model);
    }
  }

  model.generators.clear();
  model.discriminators.clear();
  for (std::size_t i = 0; i < k; ++i) {
    model.generators.push_back(std::move(actors[i].params));
    model.discriminators.push_back(std::move(critics[i].params));
  }
  return model;
}

}  // namespace detail

// K generator/discriminator pairs, pair i trained only on partition i.
inline TrainedModel train_mgmd(const Dataset& train, const TrainConfig& config,
                               const TrainObserver* observer = nullptr) {
  detail::require(config.method == Method::kMgmd, "train_mgmd requires method == mgmd");
  return detail::train_pairs(train, config, observer);
}

// Single pair on the full training set. Shares the mgmd code path, so the
// trajectory equals train_mgmd with k = 1 under the same seed.
inline TrainedModel train_classic(const Dataset& train, const TrainConfig& config,
                                  const TrainObserver* observer = nullptr) {
  detail::require(config.method == Method::kClassic, "train_classic requires method == classic");
  return detail::train_pairs(train, config, observer);
}

// PAR-GAN-style baseline: one generator, k discriminators on disjoint
// partitions. The generator descends the mean of its loss terms against all
// discriminators.
inline TrainedModel train_pargan(const Dataset& train, const TrainConfig& cfg,
                                 const TrainObserver* obs = nullptr) {
  detail::require(cfg.method == Method::kParGan, "train_pargan requires method == pargan");
  detail::check_data(train, cfg);
  const std::size_t k = cfg.k;
  TrainedModel model;
  model.method = cfg.method;
  model.config = cfg;
  model.partitions = detail::make_partitions(train, cfg);

  detail::Actor actor;
  actor.params = init_params(cfg.generator, Rng::derive(cfg.seed, detail::kGenInitStream));
  actor.opt = OptimizerState(cfg.optimizer);
  actor.rng = Rng(Rng::derive(cfg.seed, detail::kSharedGenStream));
  std::vector<detail::Critic> critics(k);
  std::size_t largest = 0;
  for (std::size_t i = 0; i < k; ++i) {
    critics[i].params =
        init_params(cfg.discriminator, Rng::derive(cfg.seed, detail::kDiscInitStream + i));
    critics[i].opt = OptimizerState(cfg.optimizer);
    critics[i].cursor = detail::BatchCursor(model.partitions.parts[i]);
    critics[i].rng = Rng(Rng::derive(cfg.seed, detail::kPairStream + i));
    largest = std::max(largest, critics[i].cursor.size());
  }
  const std::size_t steps = detail::steps_for(largest, cfg.batch_size);
  const std::size_t rows = std::min(cfg.batch_size, largest);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<detail::Accum> d_acc(k);
    detail::Accum g_acc, s_acc;
    for (std::size_t step = 0; step < steps; ++step) {
      for (std::size_t i = 0; i < k; ++i) {
        detail::with_context(epoch, i, [&] {
          StepEvent ev{epoch, i, step, Phase::kCritic, {}, nullptr, nullptr};
          for (std::size_t d = 0; d < cfg.d_steps_per_g_step; ++d) {
            d_acc[i].add(detail::critic_step(cfg, train, critics[i], actor.params, obs, ev));
          }
        });
      }
      std::vector<const MlpParams*> against;
      for (const auto& c : critics) against.push_back(&c.params);
      const auto g = detail::with_context(epoch, 0, [&] {
        return detail::generator_step(cfg, actor, actor.rng, against, static_cast<double>(k),
                                      rows);
      });
      g_acc.add(g.value);
      s_acc.add(g.surrogate);
      if (obs && obs->on_step) {
        StepEvent ev{epoch, 0, step, Phase::kGenerator, {}, &actor.params, nullptr};
        obs->on_step(ev);
      }
    }
    EpochLosses losses;
    for (const auto& a : d_acc) losses.d_loss.push_back(a.mean());
    losses.g_loss = {g_acc.mean()};
    losses.g_surrogate = {s_acc.mean()};
    model.history.push_back(std::move(losses));
    if (obs && obs->on_epoch_end) {
      model.generators = {actor.params};
      model.discriminators.clear();
      for (const auto& c : critics) model.discriminators.push_back(c.params);
      obs->on_epoch_end(epoch, model);
    }
  }
  model.generators = {std::move(actor.params)};
  model.discriminators.clear();
  for (auto& c : critics) model.discriminators.push_back(std::move(c.params));
  return model;
}

// The model every training run starts from: initial weights, partitions
// and no history. Serves as the untrained baseline for attacks.
inline TrainedModel initialize_model(const Dataset& train_data, const TrainConfig& cfg) {
  cfg.validate();
  detail::check_data(train_data, cfg);
  TrainedModel model;
  model.method = cfg.method;
  model.config = cfg;
  model.partitions = detail::make_partitions(train_data, cfg);
  const std::size_t gens = cfg.method == Method::kParGan ? 1 : cfg.pair_count();
  for (std::size_t i = 0; i < gens; ++i) {
    model.generators.push_back(
        init_params(cfg.generator, Rng::derive(cfg.seed, detail::kGenInitStream + i)));
  }
  for (std::size_t i = 0; i < cfg.pair_count(); ++i) {
    model.discriminators.push_back(
        init_params(cfg.discriminator, Rng::derive(cfg.seed, detail::kDiscInitStream + i)));
  }
  return model;
}

inline TrainedModel train(const Dataset& train_data, const TrainConfig& config,
                          const TrainObserver* observer = nullptr) {
  switch (config.method) {
    case Method::kMgmd: return train_mgmd(train_data, config, observer);
    case Method::kClassic: return train_classic(train_data, config, observer);
    case Method::kParGan: return train_pargan(train_data, config, observer);
  }
  throw ContractError("unknown method");
}

}  // namespace mgmd
