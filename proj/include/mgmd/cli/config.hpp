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

// Run configuration: a JSON document that mirrors TrainConfig plus dataset
// selection, train/holdout split, evaluation settings and an output
// directory. Unknown keys are rejected; omitted keys take defaults, some of
// which depend on the dataset source and the objective.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "mgmd/analysis.hpp"
#include "mgmd/attacks.hpp"
#include "mgmd/data.hpp"
#include "mgmd/digest.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/json_io.hpp"
#include "mgmd/training.hpp"

namespace mgmd::cli {

struct DatasetConfig {
  DataSource source = DataSource::kSynthetic;
  RingSpec ring{2000, 8, 2.0, 0.05, 0};
  std::string images_path;
  std::string labels_path;
  // Optional separate holdout files; without them the loaded set is split.
  std::string holdout_images_path;
  std::string holdout_labels_path;

  bool has_holdout_files() const { return !holdout_images_path.empty(); }
};

struct EvalConfig {
  // Per side; 0 takes the largest balanced set.
  std::size_t size = 0;
  std::size_t m_per_generator = 0;
  Aggregation aggregation = Aggregation::kMax;
  bool per_partition = false;
  HoldoutMode holdout_mode = HoldoutMode::kFolds;
  std::size_t bins = kDefaultBins;
};

struct RunConfig {
  TrainConfig train;
  DatasetConfig dataset;
  // train_size 0: half of the loaded samples.
  SplitSpec split{0, 0, 0};
  EvalConfig eval;
  std::string output_dir = "run";
  // Fully defaulted form without output_dir; its SHA-256 is the config hash.
  Json canonical;

  std::string hash() const { return to_hex(sha256(canonical.dump())); }
};

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("key \"") + key + "\" has the wrong type");
  }
}

inline std::size_t get_count(const Json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(std::string("key \"") + key + "\" must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

inline MlpSpec parse_mlp(const Json& j, MlpSpec fallback, const char* where) {
  mgmd::detail::expect_keys(j, {"widths", "leaky_alpha", "output"}, where, false);
  if (j.contains("widths")) {
    const Json& w = j.at("widths");
    if (!w.is_array()) throw ConfigError(std::string(where) + ".widths must be an array");
    fallback.widths.clear();
    for (const Json& v : w) {
      if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
        throw ConfigError(std::string(where) + ".widths entries must be positive integers");
      }
      fallback.widths.push_back(v.get<std::size_t>());
    }
  }
  fallback.leaky_alpha = get_or(j, "leaky_alpha", fallback.leaky_alpha);
  if (j.contains("output")) fallback.output = parse_activation(j.at("output"));
  return fallback;
}

}  // namespace detail

inline Json to_json(const DatasetConfig& d) {
  if (d.source == DataSource::kMnist) {
    Json j = {{"source", "mnist"}, {"images", d.images_path}, {"labels", d.labels_path}};
    if (d.has_holdout_files()) {
      j["holdout_images"] = d.holdout_images_path;
      j["holdout_labels"] = d.holdout_labels_path;
    }
    return j;
  }
  return {{"source", "synthetic"},
          {"n", d.ring.n},
          {"modes", d.ring.modes},
          {"radius", d.ring.radius},
          {"sigma", d.ring.sigma},
          {"seed", d.ring.seed}};
}

inline Json to_json(const EvalConfig& e) {
  return {{"size", e.size},
          {"m_per_generator", e.m_per_generator},
          {"aggregation", to_string(e.aggregation)},
          {"per_partition", e.per_partition},
          {"holdout_mode", e.holdout_mode == HoldoutMode::kFolds ? "folds" : "all"},
          {"bins", e.bins}};
}

// Relative dataset paths resolve against base_dir.
inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_count;
  using detail::get_or;
  mgmd::detail::expect_keys(
      j,
      {"method", "k", "epochs", "batch_size", "objective", "optimizer", "d_steps_per_g_step",
       "clip_c", "seed", "checkpoint_interval", "generator", "discriminator", "latent_dim",
       "stratified", "parallel", "dataset", "split", "eval", "output_dir"},
      "config", false);
  RunConfig rc;
  try {
    // Dataset first: architecture defaults depend on it.
    const Json ds = j.value("dataset", Json::object());
    mgmd::detail::expect_keys(ds,
                              {"source", "n", "modes", "radius", "sigma", "seed", "images",
                               "labels", "holdout_images", "holdout_labels"},
                              "dataset", false);
    const std::string source = get_or<std::string>(ds, "source", "synthetic");
    if (source == "mnist") {
      rc.dataset.source = DataSource::kMnist;
      if (!ds.contains("images") || !ds.contains("labels")) {
        throw ConfigError("dataset: mnist requires \"images\" and \"labels\" paths");
      }
      auto path_of = [&](const char* key) {
        std::filesystem::path p = ds.at(key).get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        return p.lexically_normal().string();
      };
      rc.dataset.images_path = path_of("images");
      rc.dataset.labels_path = path_of("labels");
      if (ds.contains("holdout_images") != ds.contains("holdout_labels")) {
        throw ConfigError("dataset: holdout_images and holdout_labels go together");
      }
      if (ds.contains("holdout_images")) {
        rc.dataset.holdout_images_path = path_of("holdout_images");
        rc.dataset.holdout_labels_path = path_of("holdout_labels");
      }
    } else if (source == "synthetic") {
      for (const char* key : {"images", "labels", "holdout_images", "holdout_labels"}) {
        if (ds.contains(key)) throw ConfigError(std::string("dataset.") + key + " needs source mnist");
      }
      rc.dataset.ring.n = get_count(ds, "n", rc.dataset.ring.n);
      rc.dataset.ring.modes = get_count(ds, "modes", rc.dataset.ring.modes);
      rc.dataset.ring.radius = get_or(ds, "radius", rc.dataset.ring.radius);
      rc.dataset.ring.sigma = get_or(ds, "sigma", rc.dataset.ring.sigma);
      rc.dataset.ring.seed = get_or<std::uint64_t>(ds, "seed", 0);
      if (rc.dataset.ring.modes < 1) throw ConfigError("dataset.modes must be >= 1");
      if (!(rc.dataset.ring.sigma > 0.0)) throw ConfigError("dataset.sigma must be > 0");
      if (rc.dataset.ring.n < 2) throw ConfigError("dataset.n must be >= 2");
    } else {
      throw ConfigError("dataset.source must be \"synthetic\" or \"mnist\"");
    }
    const bool mnist = rc.dataset.source == DataSource::kMnist;

    TrainConfig& t = rc.train;
    t.method = parse_method(j.value("method", Json("mgmd")));
    t.k = get_count(j, "k", t.method == Method::kClassic ? 1 : 2);
    t.epochs = get_count(j, "epochs", 1500);
    t.batch_size = get_count(j, "batch_size", 64);

    const Json obj = j.value("objective", Json::object());
    mgmd::detail::expect_keys(obj, {"kind", "generator_mode", "generator_coupling"}, "objective",
                              false);
    t.objective.kind = parse_objective_kind(obj.value("kind", Json("js")));
    const bool js = t.objective.kind == ObjectiveKind::kJs;
    t.objective.generator_mode =
        obj.contains("generator_mode")
            ? parse_generator_mode(obj.at("generator_mode"))
            : (js ? GeneratorMode::kNonSaturating : GeneratorMode::kMinimax);
    t.objective.coupling = parse_coupling(obj.value("generator_coupling", Json("own")));

    const Json opt = j.value("optimizer", Json::object());
    mgmd::detail::expect_keys(opt, {"kind", "learning_rate", "beta1", "beta2", "epsilon"},
                              "optimizer", false);
    OptimizerSettings defaults;
    if (!js) defaults.learning_rate = 1e-4;
    t.optimizer.kind = parse_optimizer_kind(opt.value("kind", Json("adam")));
    t.optimizer.learning_rate = get_or(opt, "learning_rate", defaults.learning_rate);
    t.optimizer.beta1 = get_or(opt, "beta1", defaults.beta1);
    t.optimizer.beta2 = get_or(opt, "beta2", defaults.beta2);
    t.optimizer.epsilon = get_or(opt, "epsilon", defaults.epsilon);

    t.d_steps_per_g_step = get_count(j, "d_steps_per_g_step", js ? 1 : 5);
    t.clip_c = get_or(j, "clip_c", 0.01);
    t.seed = get_or<std::uint64_t>(j, "seed", 0);
    t.checkpoint_interval = get_count(j, "checkpoint_interval", 0);
    t.prior.latent_dim = get_count(j, "latent_dim", mnist ? 64 : 8);
    const std::size_t d = mnist ? 784 : 2;
    const MlpSpec gen_default =
        mnist ? MlpSpec{{t.prior.latent_dim, 128, 256, d}, 0.2, Activation::kSigmoid}
              : MlpSpec{{t.prior.latent_dim, 32, 32, d}, 0.2, Activation::kSigmoid};
    const MlpSpec disc_default = mnist ? MlpSpec{{d, 256, 128, 1}, 0.2, Activation::kSigmoid}
                                       : MlpSpec{{d, 32, 32, 1}, 0.2, Activation::kSigmoid};
    t.generator = detail::parse_mlp(j.value("generator", Json::object()), gen_default, "generator");
    t.discriminator =
        detail::parse_mlp(j.value("discriminator", Json::object()), disc_default, "discriminator");
    // The discriminator output activation follows the objective.
    t.discriminator.output = discriminator_output(t.objective.kind);
    t.stratified = get_or(j, "stratified", false);
    t.parallel = get_or(j, "parallel", false);

    const Json sp = j.value("split", Json::object());
    mgmd::detail::expect_keys(sp, {"train", "holdout", "seed"}, "split", false);
    rc.split.train_size = get_count(sp, "train", mnist ? 0 : rc.dataset.ring.n / 2);
    rc.split.holdout_size = get_count(sp, "holdout", 0);
    rc.split.seed = get_or<std::uint64_t>(sp, "seed", 0);
    if (!mnist && rc.split.train_size == 0) throw ConfigError("split.train must be >= 1");
    if (!mnist && rc.split.train_size + rc.split.holdout_size > rc.dataset.ring.n) {
      throw ConfigError("split: train + holdout exceeds dataset.n");
    }

    const Json ev = j.value("eval", Json::object());
    mgmd::detail::expect_keys(ev,
                              {"size", "m_per_generator", "aggregation", "per_partition",
                               "holdout_mode", "bins"},
                              "eval", false);
    rc.eval.size = get_count(ev, "size", 0);
    rc.eval.m_per_generator = get_count(ev, "m_per_generator", 0);
    rc.eval.aggregation = mgmd::detail::parse_enum<Aggregation>(
        ev.value("aggregation", Json("max")), "eval.aggregation",
        {{"max", Aggregation::kMax}, {"mean", Aggregation::kMean}});
    rc.eval.per_partition = get_or(ev, "per_partition", false);
    rc.eval.holdout_mode = mgmd::detail::parse_enum<HoldoutMode>(
        ev.value("holdout_mode", Json("folds")), "eval.holdout_mode",
        {{"folds", HoldoutMode::kFolds}, {"all", HoldoutMode::kAll}});
    rc.eval.bins = get_count(ev, "bins", kDefaultBins);
    if (rc.eval.bins < 1) throw ConfigError("eval.bins must be >= 1");

    rc.output_dir = get_or<std::string>(j, "output_dir", "run");
    t.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }

  Json canonical = to_json(rc.train);
  canonical["dataset"] = to_json(rc.dataset);
  canonical["split"] = {{"train", rc.split.train_size},
                        {"holdout", rc.split.holdout_size},
                        {"seed", rc.split.seed}};
  canonical["eval"] = to_json(rc.eval);
  rc.canonical = std::move(canonical);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

}  // namespace mgmd::cli
