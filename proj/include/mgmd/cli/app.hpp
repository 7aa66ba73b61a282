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

// Argument parsing and exit codes for the mgmd tool.
//
//   0  success
//   1  configuration or usage error
//   2  data, checkpoint or file-system error
//   3  numeric failure during training
//   4  anything else

#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mgmd/cli/commands.hpp"

namespace mgmd::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitNumeric = 3,
  kExitInternal = 4,
};

template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    // ContractError / DimensionError raised against the loaded data.
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}

inline int run_main(int argc, char** argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Multi-generator multi-discriminator GAN training and privacy evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", config_path, "Run config path")->required();

  std::string checkpoint;
  std::string target;
  std::string aggregation;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto* attack = app.add_subcommand("attack", "Membership-inference attacks on a checkpoint");
  attack->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  attack->add_option("--target", target, "discriminators or generators (default: both)")
      ->check(CLI::IsMember({"discriminators", "generators"}));
  attack->add_option("--aggregation", aggregation, "max or mean (default: from config)")
      ->check(CLI::IsMember({"max", "mean"}));
  attack->add_option("--seed", seed, "Eval-set and generator-pool seed")->required();
  attack->add_option("--out", out_dir, "Output directory (default: checkpoint directory)");

  auto* report = app.add_subcommand("report", "Score distributions and generalization gap");
  report->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  report->add_option("--out", out_dir, "Output directory (default: checkpoint directory)");

  std::string matrix;
  auto* compare = app.add_subcommand("compare", "Train and evaluate a method matrix");
  compare->add_option("--matrix", matrix, "Matrix JSON path")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  auto out_opt = [&]() -> std::optional<std::filesystem::path> {
    if (out_dir.empty()) return std::nullopt;
    return std::filesystem::path(out_dir);
  };

  return guarded(
      [&] {
        if (train->parsed()) {
          const auto r = cmd_train(config_path);
          out << r.checkpoint.string() << "\n" << r.losses.string() << "\n"
              << r.manifest.string() << "\n";
        } else if (attack->parsed()) {
          AttackOptions opt;
          if (!target.empty()) {
            opt.target = target == "generators" ? AttackTarget::kGenerators
                                                : AttackTarget::kDiscriminators;
          }
          if (!aggregation.empty()) {
            opt.aggregation = aggregation == "mean" ? Aggregation::kMean : Aggregation::kMax;
          }
          opt.seed = seed;
          opt.out_dir = out_opt();
          for (const auto& p : cmd_attack(checkpoint, opt)) out << p.string() << "\n";
        } else if (report->parsed()) {
          const auto r = cmd_report(checkpoint, out_opt());
          out << r.scores.string() << "\n" << r.hist.string() << "\n" << r.gap.string() << "\n";
        } else if (compare->parsed()) {
          const auto r = cmd_compare(matrix, out_dir);
          err << r.trained << " cell run(s) trained, " << r.cached << " reused from cache\n";
          out << r.summary.string() << "\n";
        }
      },
      err);
}

}  // namespace mgmd::cli
