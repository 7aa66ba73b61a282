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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgmd/data.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/training.hpp"

namespace mgmd {

enum class AttackTarget { kDiscriminators, kGenerators };
enum class Aggregation { kMax, kMean };

inline std::string_view to_string(AttackTarget t) {
  return t == AttackTarget::kDiscriminators ? "discriminators" : "generators";
}
inline std::string_view to_string(Aggregation a) { return a == Aggregation::kMax ? "max" : "mean"; }

// Balanced member / non-member samples. member_part[i] is the partition that
// member i was trained in.
struct MembershipEvalSet {
  Tensor members;
  std::vector<std::uint64_t> member_ids;
  std::vector<std::size_t> member_part;
  Tensor nonmembers;
  std::vector<std::uint64_t> nonmember_ids;

  std::size_t size() const { return member_ids.size(); }
};

// Draws `size` members from `train` and as many non-members from `holdout`
// (size 0 takes the largest balanced set).
inline MembershipEvalSet make_eval_set(const Dataset& train, const Dataset& holdout,
                                       const PartitionSet& partitions, std::size_t size,
                                       std::uint64_t seed) {
  const std::size_t cap = std::min(train.size(), holdout.size());
  if (size == 0) size = cap;
  if (size == 0 || size > cap) {
    throw ContractError("eval set of " + std::to_string(size) + " per side needs that many train" +
                        " and holdout samples (have " + std::to_string(train.size()) + "/" +
                        std::to_string(holdout.size()) + ")");
  }
  std::vector<std::size_t> part_of(train.size(), 0);
  for (std::size_t p = 0; p < partitions.parts.size(); ++p) {
    for (std::size_t idx : partitions.parts[p]) part_of.at(idx) = p;
  }
  Rng rng(seed);
  auto pick = [&](std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    order.resize(size);
    return order;
  };
  const auto m = pick(train.size());
  const auto h = pick(holdout.size());
  MembershipEvalSet eval;
  eval.members = train.samples.gather_rows(m);
  eval.nonmembers = holdout.samples.gather_rows(h);
  for (std::size_t i : m) {
    eval.member_ids.push_back(train.ids[i]);
    eval.member_part.push_back(part_of[i]);
  }
  for (std::size_t i : h) eval.nonmember_ids.push_back(holdout.ids[i]);
  return eval;
}

// Combines per-discriminator scores into one score per row.
inline std::vector<double> aggregate_scores(const std::vector<std::vector<double>>& per_disc,
                                            Aggregation rule) {
  detail::require(!per_disc.empty(), "no discriminator scores");
  const std::size_t n = per_disc.front().size();
  std::vector<double> out(n);
  for (std::size_t r = 0; r < n; ++r) {
    double acc = rule == Aggregation::kMax ? -std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& scores : per_disc) {
      acc = rule == Aggregation::kMax ? std::max(acc, scores[r]) : acc + scores[r];
    }
    out[r] = rule == Aggregation::kMax ? acc : acc / static_cast<double>(per_disc.size());
  }
  return out;
}

// White-box discriminator scores for arbitrary rows, aggregated across all
// discriminators.
inline std::vector<double> discriminator_membership_scores(const TrainedModel& model,
                                                           const Tensor& x, Aggregation rule) {
  if (model.discriminators.empty()) throw ContractError("model has no discriminators");
  if (x.rows() == 0) throw ContractError("empty eval set");
  std::vector<std::vector<double>> per_disc;
  for (const MlpParams& d : model.discriminators) {
    per_disc.push_back(
        discriminator_forward(model.config.discriminator, d, x, model.objective().kind));
  }
  return aggregate_scores(per_disc, rule);
}

struct SideScores {
  std::vector<double> members;
  std::vector<double> nonmembers;
};

// Partition-aware variant: member rows are scored only by the discriminator
// of their own partition, non-member row j by discriminator j mod k.
inline SideScores per_partition_scores(const TrainedModel& model, const MembershipEvalSet& eval) {
  const std::size_t k = model.discriminators.size();
  if (k == 0) throw ContractError("model has no discriminators");
  if (eval.size() == 0) throw ContractError("empty eval set");
  auto score_rows = [&](const Tensor& x, auto disc_for) {
    std::vector<double> out(x.rows());
    std::vector<std::vector<std::size_t>> rows(k);
    for (std::size_t r = 0; r < x.rows(); ++r) rows[disc_for(r) % k].push_back(r);
    for (std::size_t d = 0; d < k; ++d) {
      if (rows[d].empty()) continue;
      const auto s = discriminator_forward(model.config.discriminator, model.discriminators[d],
                                           x.gather_rows(rows[d]), model.objective().kind);
      for (std::size_t i = 0; i < rows[d].size(); ++i) out[rows[d][i]] = s[i];
    }
    return out;
  };
  SideScores out;
  out.members = score_rows(eval.members, [&](std::size_t r) { return eval.member_part[r]; });
  out.nonmembers = score_rows(eval.nonmembers, [](std::size_t r) { return r; });
  return out;
}

// Negated squared distance from each row of x to its nearest row of pool.
inline std::vector<double> nearest_pool_scores(const Tensor& x, const Tensor& pool) {
  if (x.cols() != pool.cols()) throw DimensionError("eval rows and pool rows differ in width");
  detail::require(pool.rows() > 0, "empty sample pool");
  std::vector<double> out(x.rows());
  const std::size_t d = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pool.rows(); ++j) {
      double dist = 0.0;
      for (std::size_t c = 0; c < d && dist < best; ++c) {
        const double diff = x.at(i, c) - pool.at(j, c);
        dist += diff * diff;
      }
      best = std::min(best, dist);
    }
    out[i] = -best;
  }
  return out;
}

// m samples from every generator, generator g drawing from substream g of
// `seed`.
inline Tensor generator_pool(const TrainedModel& model, std::size_t m_per_generator,
                             std::uint64_t seed) {
  detail::require(m_per_generator >= 1, "m_per_generator must be >= 1");
  detail::require(!model.generators.empty(), "model has no generators");
  const MlpSpec& spec = model.config.generator;
  Tensor pool({m_per_generator * model.generators.size(), spec.output_dim()});
  for (std::size_t g = 0; g < model.generators.size(); ++g) {
    const Tensor s = sample_generator(spec, model.generators[g], model.config.prior,
                                      m_per_generator, Rng::derive(seed, g));
    std::copy(s.values().begin(), s.values().end(),
              pool.values().begin() + static_cast<std::ptrdiff_t>(g * s.size()));
  }
  return pool;
}

inline std::vector<double> generator_membership_scores(const TrainedModel& model, const Tensor& x,
                                                       std::size_t m_per_generator,
                                                       std::uint64_t seed) {
  return nearest_pool_scores(x, generator_pool(model, m_per_generator, seed));
}

struct AttackResult {
  AttackTarget target = AttackTarget::kDiscriminators;
  std::string aggregation;
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
  double threshold = 0.0;
  // true: predict member iff score >= threshold; false: iff score < threshold.
  bool member_if_greater = true;
  double accuracy = 0.5;
  std::uint64_t seed = 0;

  friend bool operator==(const AttackResult&, const AttackResult&) = default;
};

// Best accuracy of a single-threshold classifier over the balanced score
// sets. Candidates are the distinct observed scores, each tried in both
// orientations; the first (smallest) threshold reaching the maximum wins,
// with ">=" preferred over "<" at equal threshold.
inline AttackResult best_threshold_accuracy(std::span<const double> member_scores,
                                            std::span<const double> nonmember_scores) {
  if (member_scores.empty() || nonmember_scores.empty()) {
    throw ContractError("best_threshold_accuracy: empty score list");
  }
  if (member_scores.size() != nonmember_scores.size()) {
    throw ContractError("best_threshold_accuracy: " + std::to_string(member_scores.size()) +
                        " member scores vs " + std::to_string(nonmember_scores.size()) +
                        " non-member scores");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(member_scores.size() * 2);
  for (double s : member_scores) all.emplace_back(s, true);
  for (double s : nonmember_scores) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::size_t total = all.size();
  const std::size_t members = member_scores.size();
  // Sweep thresholds upward: below the current value everything is
  // predicted non-member.
  std::size_t members_below = 0, nonmembers_below = 0;
  std::size_t best_correct = 0;
  AttackResult r;
  bool have = false;
  for (std::size_t i = 0; i < total;) {
    const double t = all[i].first;
    const std::size_t ge_correct = (members - members_below) + nonmembers_below;
    const std::size_t lt_correct = total - ge_correct;
    if (!have || ge_correct > best_correct) {
      best_correct = ge_correct;
      r.threshold = t;
      r.member_if_greater = true;
      have = true;
    }
    if (lt_correct > best_correct) {
      best_correct = lt_correct;
      r.threshold = t;
      r.member_if_greater = false;
    }
    while (i < total && all[i].first == t) {
      (all[i].second ? members_below : nonmembers_below) += 1;
      ++i;
    }
  }
  r.accuracy = static_cast<double>(best_correct) / static_cast<double>(total);
  r.member_scores.assign(member_scores.begin(), member_scores.end());
  r.nonmember_scores.assign(nonmember_scores.begin(), nonmember_scores.end());
  return r;
}

struct AttackConfig {
  Aggregation aggregation = Aggregation::kMax;
  bool per_partition = false;
  // 0 means ten times the eval-set size.
  std::size_t m_per_generator = 0;
  std::uint64_t seed = 0;
};

inline AttackResult run_mia(const TrainedModel& model, const MembershipEvalSet& eval,
                            AttackTarget target, const AttackConfig& cfg) {
  if (eval.size() == 0 || eval.nonmember_ids.size() != eval.size()) {
    throw ContractError("run_mia: eval set must be non-empty and balanced");
  }
  AttackResult r;
  if (target == AttackTarget::kDiscriminators) {
    SideScores s;
    if (cfg.per_partition) {
      s = per_partition_scores(model, eval);
    } else {
      s.members = discriminator_membership_scores(model, eval.members, cfg.aggregation);
      s.nonmembers = discriminator_membership_scores(model, eval.nonmembers, cfg.aggregation);
    }
    r = best_threshold_accuracy(s.members, s.nonmembers);
    r.aggregation = cfg.per_partition ? "per_partition" : std::string(to_string(cfg.aggregation));
  } else {
    const std::size_t m = cfg.m_per_generator ? cfg.m_per_generator : 10 * eval.size();
    const Tensor pool = generator_pool(model, m, cfg.seed);
    r = best_threshold_accuracy(nearest_pool_scores(eval.members, pool),
                                nearest_pool_scores(eval.nonmembers, pool));
    r.aggregation = "nearest_sample";
  }
  r.target = target;
  r.seed = cfg.seed;
  return r;
}

}  // namespace mgmd
