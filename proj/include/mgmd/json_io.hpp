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

// JSON forms of the configuration types. Parsing is strict: every key must
// be present and no others are accepted.

#pragma once

#include <set>
#include <string>
#include <string_view>

#include "json.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "mgmd/numerics/optimizer.hpp"
#include "mgmd/objectives.hpp"
#include "mgmd/training.hpp"

namespace mgmd {

using Json = nlohmann::json;

namespace detail {

inline void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view where, bool all_required) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  std::set<std::string_view> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
  if (all_required) {
    for (std::string_view key : allowed) {
      if (!j.contains(key)) {
        throw ConfigError(std::string(where) + ": missing key \"" + std::string(key) + "\"");
      }
    }
  }
}

template <typename E>
E parse_enum(const Json& j, std::string_view where,
             std::initializer_list<std::pair<std::string_view, E>> table) {
  if (!j.is_string()) throw ConfigError(std::string(where) + ": expected a string");
  const auto text = j.get<std::string>();
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw ConfigError(std::string(where) + ": unknown value \"" + text + "\"");
}

}  // namespace detail

inline Method parse_method(const Json& j) {
  return detail::parse_enum<Method>(
      j, "method",
      {{"mgmd", Method::kMgmd}, {"classic", Method::kClassic}, {"pargan", Method::kParGan}});
}

inline ObjectiveKind parse_objective_kind(const Json& j) {
  return detail::parse_enum<ObjectiveKind>(
      j, "objective.kind", {{"js", ObjectiveKind::kJs}, {"wasserstein", ObjectiveKind::kWasserstein}});
}

inline GeneratorMode parse_generator_mode(const Json& j) {
  return detail::parse_enum<GeneratorMode>(
      j, "objective.generator_mode",
      {{"minimax", GeneratorMode::kMinimax}, {"non_saturating", GeneratorMode::kNonSaturating}});
}

inline Coupling parse_coupling(const Json& j) {
  return detail::parse_enum<Coupling>(j, "objective.generator_coupling",
                                      {{"own", Coupling::kOwn}, {"all", Coupling::kAll}});
}

inline Activation parse_activation(const Json& j) {
  return detail::parse_enum<Activation>(j, "output",
                                        {{"sigmoid", Activation::kSigmoid},
                                         {"tanh", Activation::kTanh},
                                         {"identity", Activation::kIdentity}});
}

inline OptimizerKind parse_optimizer_kind(const Json& j) {
  return detail::parse_enum<OptimizerKind>(
      j, "optimizer.kind", {{"sgd", OptimizerKind::kSgd}, {"adam", OptimizerKind::kAdam}});
}

inline Json to_json(const Objective& o) {
  return {{"kind", to_string(o.kind)},
          {"generator_mode", to_string(o.generator_mode)},
          {"generator_coupling", to_string(o.coupling)}};
}

inline Json to_json(const MlpSpec& s) {
  return {{"widths", s.widths}, {"leaky_alpha", s.leaky_alpha}, {"output", to_string(s.output)}};
}

inline MlpSpec mlp_spec_from_json(const Json& j) {
  detail::expect_keys(j, {"widths", "leaky_alpha", "output"}, "mlp", true);
  MlpSpec s;
  s.widths = j.at("widths").get<std::vector<std::size_t>>();
  s.leaky_alpha = j.at("leaky_alpha").get<double>();
  s.output = parse_activation(j.at("output"));
  return s;
}

inline Json to_json(const OptimizerSettings& o) {
  return {{"kind", o.kind == OptimizerKind::kSgd ? "sgd" : "adam"},
          {"learning_rate", o.learning_rate},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"epsilon", o.epsilon}};
}

inline Json to_json(const TrainConfig& c) {
  return {{"method", to_string(c.method)},
          {"k", c.k},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"objective", to_json(c.objective)},
          {"optimizer", to_json(c.optimizer)},
          {"d_steps_per_g_step", c.d_steps_per_g_step},
          {"clip_c", c.clip_c},
          {"seed", c.seed},
          {"checkpoint_interval", c.checkpoint_interval},
          {"generator", to_json(c.generator)},
          {"discriminator", to_json(c.discriminator)},
          {"latent_dim", c.prior.latent_dim},
          {"stratified", c.stratified},
          {"parallel", c.parallel}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  detail::expect_keys(j,
                      {"method", "k", "epochs", "batch_size", "objective", "optimizer",
                       "d_steps_per_g_step", "clip_c", "seed", "checkpoint_interval",
                       "generator", "discriminator", "latent_dim", "stratified", "parallel"},
                      "train config", true);
  TrainConfig c;
  c.method = parse_method(j.at("method"));
  c.k = j.at("k").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  const Json& o = j.at("objective");
  detail::expect_keys(o, {"kind", "generator_mode", "generator_coupling"}, "objective", true);
  c.objective.kind = parse_objective_kind(o.at("kind"));
  c.objective.generator_mode = parse_generator_mode(o.at("generator_mode"));
  c.objective.coupling = parse_coupling(o.at("generator_coupling"));
  const Json& opt = j.at("optimizer");
  detail::expect_keys(opt, {"kind", "learning_rate", "beta1", "beta2", "epsilon"}, "optimizer",
                      true);
  c.optimizer.kind = parse_optimizer_kind(opt.at("kind"));
  c.optimizer.learning_rate = opt.at("learning_rate").get<double>();
  c.optimizer.beta1 = opt.at("beta1").get<double>();
  c.optimizer.beta2 = opt.at("beta2").get<double>();
  c.optimizer.epsilon = opt.at("epsilon").get<double>();
  c.d_steps_per_g_step = j.at("d_steps_per_g_step").get<std::size_t>();
  c.clip_c = j.at("clip_c").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.checkpoint_interval = j.at("checkpoint_interval").get<std::size_t>();
  c.generator = mlp_spec_from_json(j.at("generator"));
  c.discriminator = mlp_spec_from_json(j.at("discriminator"));
  c.prior.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.stratified = j.at("stratified").get<bool>();
  c.parallel = j.at("parallel").get<bool>();
  return c;
}

}  // namespace mgmd
