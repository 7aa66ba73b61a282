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

// The four workflow commands. Each one reads files, writes files atomically
// and throws typed errors; exit-code mapping lives in app.hpp.

#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mgmd/analysis.hpp"
#include "mgmd/attacks.hpp"
#include "mgmd/checkpoint.hpp"
#include "mgmd/cli/config.hpp"
#include "mgmd/data.hpp"
#include "mgmd/json_io.hpp"
#include "mgmd/training.hpp"

namespace mgmd::cli {

namespace fs = std::filesystem;

inline constexpr const char* kModelFile = "model.ckpt";
inline constexpr const char* kLossesFile = "losses.csv";
inline constexpr const char* kManifestFile = "manifest.json";

// Text stored in TrainedModel::config_echo.
inline std::string make_echo(const RunConfig& rc) {
  return Json{{"config_hash", rc.hash()}, {"config", rc.canonical}}.dump();
}

inline RunConfig config_from_model(const TrainedModel& model) {
  Json echo;
  try {
    echo = Json::parse(model.config_echo);
  } catch (const Json::exception&) {
    throw CheckpointError("checkpoint carries no run configuration");
  }
  if (!echo.is_object() || !echo.contains("config")) {
    throw CheckpointError("checkpoint carries no run configuration");
  }
  RunConfig rc = parse_run_config(echo.at("config"));
  if (rc.train != model.config) {
    throw CheckpointError("checkpoint configuration does not match its echo");
  }
  return rc;
}

inline TrainHoldout load_data(const RunConfig& rc) {
  if (rc.dataset.source == DataSource::kSynthetic) {
    return split(synth_gaussian_ring(rc.dataset.ring), rc.split);
  }
  Dataset all = load_mnist_idx(rc.dataset.images_path, rc.dataset.labels_path);
  SplitSpec spec = rc.split;
  if (!rc.dataset.has_holdout_files()) {
    if (spec.train_size == 0) spec.train_size = all.size() / 2;
    return split(all, spec);
  }
  Dataset holdout =
      load_mnist_idx(rc.dataset.holdout_images_path, rc.dataset.holdout_labels_path);
  // Holdout ids continue after the training file's.
  for (auto& id : holdout.ids) id += all.size();
  spec.train_size = rc.split.train_size == 0 ? all.size() : rc.split.train_size;
  spec.holdout_size = 0;
  TrainHoldout out;
  if (spec.train_size == all.size()) {
    out.train = std::move(all);
  } else {
    out.train = split(all, spec).train;
  }
  const std::size_t h = rc.split.holdout_size == 0 ? holdout.size() : rc.split.holdout_size;
  if (h > holdout.size()) throw ContractError("split: holdout larger than the holdout files");
  std::vector<std::size_t> rows(h);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  out.holdout = holdout.subset(rows);
  return out;
}

// One comment line per entry, for CSV preambles.
inline std::string preamble(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += "# " + k + ": " + v + "\n";
  return out;
}

inline std::string losses_csv(const TrainedModel& m, const std::string& header) {
  std::string out = header + "epoch";
  if (!m.history.empty()) {
    const auto& h = m.history.front();
    for (std::size_t i = 0; i < h.d_loss.size(); ++i) out += ",d_loss_" + std::to_string(i);
    for (std::size_t i = 0; i < h.g_loss.size(); ++i) out += ",g_loss_" + std::to_string(i);
    for (std::size_t i = 0; i < h.g_surrogate.size(); ++i) {
      out += ",g_surrogate_" + std::to_string(i);
    }
  }
  out += '\n';
  for (std::size_t e = 0; e < m.history.size(); ++e) {
    out += std::to_string(e);
    const auto& h = m.history[e];
    for (const auto* v : {&h.d_loss, &h.g_loss, &h.g_surrogate}) {
      for (double x : *v) out += ',' + mgmd::detail::fmt_double(x);
    }
    out += '\n';
  }
  return out;
}

struct TrainOutputs {
  fs::path checkpoint;
  fs::path losses;
  fs::path manifest;
  std::vector<fs::path> periodic;
  std::string config_hash;
};

inline TrainOutputs train_run(const RunConfig& rc, const fs::path& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  const TrainHoldout data = load_data(rc);
  fs::create_directories(out_dir);
  const std::string echo = make_echo(rc);
  TrainOutputs out;
  out.config_hash = rc.hash();

  TrainObserver obs;
  const std::size_t every = rc.train.checkpoint_interval;
  if (every > 0) {
    obs.on_epoch_end = [&](std::size_t epoch, const TrainedModel& m) {
      if ((epoch + 1) % every != 0 || epoch + 1 == rc.train.epochs) return;
      TrainedModel snap = m;
      snap.config_echo = echo;
      char name[40];
      std::snprintf(name, sizeof(name), "epoch_%06zu.ckpt", epoch + 1);
      const fs::path p = out_dir / "checkpoints" / name;
      fs::create_directories(p.parent_path());
      save_checkpoint(snap, p);
      out.periodic.push_back(p);
    };
  }
  TrainedModel model = train(data.train, rc.train, every > 0 ? &obs : nullptr);
  model.config_echo = echo;

  out.checkpoint = out_dir / kModelFile;
  const auto bytes = serialize_checkpoint(model);
  write_file_atomic(out.checkpoint, std::span<const std::uint8_t>(bytes));

  out.losses = out_dir / kLossesFile;
  write_file_atomic(out.losses,
                    losses_csv(model, preamble({{"config_hash", out.config_hash},
                                                {"seed", std::to_string(rc.train.seed)}})));

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json manifest = {{"config_hash", out.config_hash},
                   {"seed", rc.train.seed},
                   {"config", rc.canonical},
                   {"checkpoint", kModelFile},
                   {"checkpoint_sha256", to_hex(sha256(std::span<const std::uint8_t>(bytes)))},
                   {"losses", kLossesFile},
                   {"train_samples", data.train.size()},
                   {"holdout_samples", data.holdout.size()},
                   {"numerics",
                    {{"precision", "float64"},
                     {"init", "he_normal weights, zero biases"},
                     {"rng", "mt19937_64, splitmix64 substreams"},
                     {"log_floor", kLogFloor}}},
                   {"wall_time_seconds", wall}};
  out.manifest = out_dir / kManifestFile;
  write_file_atomic(out.manifest, manifest.dump(2) + "\n");
  return out;
}

inline TrainOutputs cmd_train(const fs::path& config_path) {
  const RunConfig rc = load_run_config(config_path);
  return train_run(rc, rc.output_dir);
}

struct AttackOptions {
  std::optional<AttackTarget> target;      // unset: both
  std::optional<Aggregation> aggregation;  // unset: from the config
  std::uint64_t seed = 0;
  std::optional<fs::path> out_dir;  // unset: next to the checkpoint
};

inline Json attack_json(const AttackResult& r, const TrainedModel& m, const RunConfig& rc) {
  return {{"target", to_string(r.target)},
          {"attacker", "best_threshold_oracle"},
          {"per_partition", rc.eval.per_partition},
          {"method", to_string(m.method)},
          {"k", m.config.pair_count()},
          {"objective", to_string(m.objective().kind)},
          {"aggregation", r.aggregation},
          {"accuracy", r.accuracy},
          {"threshold", r.threshold},
          {"member_if_greater", r.member_if_greater},
          {"eval_size", r.member_scores.size()},
          {"seed", r.seed},
          {"config_hash", rc.hash()}};
}

// Eval-set draw and generator pool use separate substreams of the seed.
inline std::vector<AttackResult> attack_model(const TrainedModel& model, const RunConfig& rc,
                                              const TrainHoldout& data,
                                              const AttackOptions& opt) {
  const MembershipEvalSet eval = make_eval_set(data.train, data.holdout, model.partitions,
                                               rc.eval.size, Rng::derive(opt.seed, 0));
  AttackConfig cfg;
  cfg.aggregation = opt.aggregation.value_or(rc.eval.aggregation);
  cfg.per_partition = rc.eval.per_partition;
  cfg.m_per_generator = rc.eval.m_per_generator;
  cfg.seed = Rng::derive(opt.seed, 1);
  std::vector<AttackResult> results;
  for (AttackTarget t : {AttackTarget::kDiscriminators, AttackTarget::kGenerators}) {
    if (opt.target && *opt.target != t) continue;
    AttackResult r = run_mia(model, eval, t, cfg);
    r.seed = opt.seed;
    results.push_back(std::move(r));
  }
  return results;
}

inline fs::path output_dir_for(const fs::path& checkpoint, const std::optional<fs::path>& dir) {
  fs::path d = dir.value_or(checkpoint.parent_path());
  if (d.empty()) d = ".";
  fs::create_directories(d);
  return d;
}

inline std::vector<fs::path> cmd_attack(const fs::path& checkpoint, const AttackOptions& opt) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const RunConfig rc = config_from_model(model);
  const TrainHoldout data = load_data(rc);
  const auto results = attack_model(model, rc, data, opt);
  const fs::path dir = output_dir_for(checkpoint, opt.out_dir);
  std::vector<fs::path> written;
  for (const AttackResult& r : results) {
    const fs::path p = dir / ("attack_" + std::string(to_string(r.target)) + ".json");
    write_file_atomic(p, attack_json(r, model, rc).dump(2) + "\n");
    written.push_back(p);
  }
  return written;
}

struct ReportOutputs {
  fs::path scores;
  fs::path hist;
  fs::path gap;
  ScoreReport report;
};

inline const char* holdout_mode_name(HoldoutMode m) {
  return m == HoldoutMode::kFolds ? "folds" : "all";
}

inline Json gap_json(const ScoreReport& r, const TrainedModel& m, const RunConfig& rc) {
  return {{"mean_gap", r.gap.mean_gap},
          {"w1", r.gap.w1},
          {"k", m.config.pair_count()},
          {"objective", to_string(m.objective().kind)},
          {"method", to_string(m.method)},
          {"seed", m.config.seed},
          {"bins", rc.eval.bins},
          {"holdout_mode", holdout_mode_name(rc.eval.holdout_mode)},
          {"config_hash", rc.hash()}};
}

inline ReportOutputs cmd_report(const fs::path& checkpoint,
                                const std::optional<fs::path>& out_dir = std::nullopt) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const RunConfig rc = config_from_model(model);
  const TrainHoldout data = load_data(rc);
  ReportOutputs out;
  out.report =
      collect_scores(model, data.train, data.holdout, rc.eval.holdout_mode, rc.eval.bins);
  const fs::path dir = output_dir_for(checkpoint, out_dir);
  const std::string head =
      preamble({{"config_hash", rc.hash()},
                {"seed", std::to_string(model.config.seed)},
                {"bins", std::to_string(rc.eval.bins) + " equal-width over [0,1]"},
                {"bin_rule", "[lo,hi) with the last bin closed; out-of-range values clamp"},
                {"holdout_mode", holdout_mode_name(rc.eval.holdout_mode)},
                {"score", model.objective().kind == ObjectiveKind::kWasserstein
                              ? "logistic of the raw critic value"
                              : "discriminator probability"}});
  out.scores = dir / "scores.csv";
  out.hist = dir / "hist.csv";
  out.gap = dir / "gap.json";
  write_file_atomic(out.scores, scores_csv(out.report, head));
  write_file_atomic(out.hist, hist_csv(out.report, head));
  write_file_atomic(out.gap, gap_json(out.report, model, rc).dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------------------
// compare

// Cells are methods x k x objectives; classic ignores k. Each cell is run
// once per seed on `base` (a run config without method, k, seed or
// output_dir).
struct CompareMatrix {
  Json base = Json::object();
  std::vector<Method> methods;
  std::vector<std::size_t> ks;
  std::vector<ObjectiveKind> objectives;
  std::vector<std::uint64_t> seeds;
};

inline CompareMatrix parse_matrix(const Json& j) {
  mgmd::detail::expect_keys(j, {"base", "methods", "k", "objectives", "seeds"}, "matrix", false);
  CompareMatrix m;
  try {
    if (j.contains("base")) {
      m.base = j.at("base");
      if (!m.base.is_object()) throw ConfigError("matrix.base must be an object");
      for (const char* key : {"method", "k", "seed", "output_dir"}) {
        if (m.base.contains(key)) {
          throw ConfigError(std::string("matrix.base must not set \"") + key + "\"");
        }
      }
    }
    for (const Json& v : j.value("methods", Json::array({"mgmd", "classic"}))) {
      m.methods.push_back(parse_method(v));
    }
    m.ks = j.value("k", std::vector<std::size_t>{2});
    for (const Json& v : j.value("objectives", Json::array({"js"}))) {
      m.objectives.push_back(parse_objective_kind(v));
    }
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{0});
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("matrix: ") + e.what());
  }
  if (m.methods.empty() || m.ks.empty() || m.objectives.empty() || m.seeds.empty()) {
    throw ConfigError("matrix: methods, k, objectives and seeds must be non-empty");
  }
  return m;
}

struct CompareRow {
  Method method = Method::kMgmd;
  std::size_t k = 1;
  ObjectiveKind objective = ObjectiveKind::kJs;
  double mia_d = 0.0;
  double mia_g = 0.0;
  double mean_gap = 0.0;
  double w1 = 0.0;
  std::size_t seeds_averaged = 0;
  std::string status = "ok";
};

struct CompareOutputs {
  fs::path summary;
  std::vector<CompareRow> rows;
  std::size_t trained = 0;
  std::size_t cached = 0;
};

namespace detail {

// A finished cell directory whose manifest matches the hash and whose
// checkpoint matches the manifest.
inline bool cell_is_cached(const fs::path& dir, const std::string& hash) {
  try {
    std::ifstream in(dir / kManifestFile);
    if (!in) return false;
    const Json m = Json::parse(in);
    if (m.at("config_hash").get<std::string>() != hash) return false;
    const auto bytes = mgmd::detail::read_file_bytes(dir / kModelFile);
    return to_hex(sha256(std::span<const std::uint8_t>(bytes))) ==
           m.at("checkpoint_sha256").get<std::string>();
  } catch (const std::exception&) {
    return false;
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline Json cell_config(const Json& base, Method method, std::size_t k, ObjectiveKind kind,
                        std::uint64_t seed) {
  Json cfg = base;
  cfg["method"] = std::string(to_string(method));
  cfg["k"] = k;
  cfg["seed"] = seed;
  if (!cfg.contains("objective")) cfg["objective"] = Json::object();
  cfg["objective"]["kind"] = std::string(to_string(kind));
  return cfg;
}

}  // namespace detail

inline CompareOutputs run_compare(const CompareMatrix& matrix, const fs::path& out_dir) {
  CompareOutputs out;
  fs::create_directories(out_dir / "cells");
  std::vector<std::pair<Method, std::size_t>> shapes;
  for (Method m : matrix.methods) {
    if (m == Method::kClassic) {
      shapes.emplace_back(m, 1);
      continue;
    }
    for (std::size_t k : matrix.ks) shapes.emplace_back(m, k);
  }
  for (const auto& [method, k] : shapes) {
    for (ObjectiveKind kind : matrix.objectives) {
      CompareRow row;
      row.method = method;
      row.k = k;
      row.objective = kind;
      std::vector<std::string> errors;
      for (std::uint64_t seed : matrix.seeds) {
        try {
          const RunConfig rc =
              parse_run_config(detail::cell_config(matrix.base, method, k, kind, seed));
          const std::string hash = rc.hash();
          const fs::path dir = out_dir / "cells" / hash.substr(0, 16);
          if (detail::cell_is_cached(dir, hash)) {
            ++out.cached;
          } else {
            train_run(rc, dir);
            ++out.trained;
          }
          const TrainedModel model = load_checkpoint(dir / kModelFile);
          const TrainHoldout data = load_data(rc);
          AttackOptions opt;
          opt.seed = seed;
          const auto attacks = attack_model(model, rc, data, opt);
          const ScoreReport rep = collect_scores(model, data.train, data.holdout,
                                                 rc.eval.holdout_mode, rc.eval.bins);
          row.mia_d += attacks.at(0).accuracy;
          row.mia_g += attacks.at(1).accuracy;
          row.mean_gap += rep.gap.mean_gap;
          row.w1 += rep.gap.w1;
          ++row.seeds_averaged;
        } catch (const std::exception& e) {
          errors.push_back("seed " + std::to_string(seed) + ": " + e.what());
        }
      }
      if (row.seeds_averaged > 0) {
        const double n = static_cast<double>(row.seeds_averaged);
        row.mia_d /= n;
        row.mia_g /= n;
        row.mean_gap /= n;
        row.w1 /= n;
      }
      if (!errors.empty()) {
        row.status = "error: " + errors.front();
        if (errors.size() > 1) row.status += " (+" + std::to_string(errors.size() - 1) + " more)";
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

inline std::string summary_csv(const std::vector<CompareRow>& rows, const std::string& head) {
  std::string out = head + "method,k,objective,mia_d,mia_g,mean_gap,w1,seeds_averaged,status\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.method)) + ',' + std::to_string(r.k) + ',' +
           std::string(to_string(r.objective)) + ',' + mgmd::detail::fmt_double(r.mia_d) + ',' +
           mgmd::detail::fmt_double(r.mia_g) + ',' + mgmd::detail::fmt_double(r.mean_gap) +
           ',' + mgmd::detail::fmt_double(r.w1) + ',' + std::to_string(r.seeds_averaged) + ',' +
           detail::csv_field(r.status) + '\n';
  }
  return out;
}

inline CompareOutputs cmd_compare(const fs::path& matrix_path, const fs::path& out_dir) {
  std::ifstream in(matrix_path);
  if (!in) throw ConfigError("cannot open matrix " + matrix_path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(matrix_path.string() + ": " + e.what());
  }
  const CompareMatrix matrix = parse_matrix(j);
  // Schema errors in the base fail the whole run rather than every row.
  parse_run_config(detail::cell_config(
      matrix.base, matrix.methods.front(),
      matrix.methods.front() == Method::kClassic ? 1 : matrix.ks.front(),
      matrix.objectives.front(), matrix.seeds.front()));
  CompareOutputs out = run_compare(matrix, out_dir);
  std::string seeds;
  for (auto s : matrix.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
  out.summary = out_dir / "summary.csv";
  write_file_atomic(out.summary,
                    summary_csv(out.rows, preamble({{"matrix_hash", to_hex(sha256(j.dump()))},
                                                    {"seeds", seeds}})));
  return out;
}

}  // namespace mgmd::cli
