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
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mgmd/data.hpp"
#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/training.hpp"

namespace mgmd {

struct Histogram {
  std::vector<double> edges;  // bins + 1, strictly increasing
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> holdout_counts;
};

struct GapMetrics {
  double mean_gap = 0.0;
  double w1 = 0.0;
};

// How holdout rows are assigned to discriminators.
enum class HoldoutMode {
  kFolds,  // contiguous equal folds, fold i scored by D_i
  kAll,    // every D_i scores the whole holdout set
};

inline constexpr std::size_t kDefaultBins = 50;

// Discriminator scores on training rows (each D_i on its own partition) and
// holdout rows, merged across discriminators in index order. `*_raw` are the
// discriminator outputs; the reported lists pass Wasserstein critic values
// through the logistic function and equal the raw lists in JS mode.
struct ScoreReport {
  std::vector<double> train;
  std::vector<double> train_raw;
  std::vector<std::size_t> train_disc;
  std::vector<double> holdout;
  std::vector<double> holdout_raw;
  std::vector<std::size_t> holdout_disc;
  Histogram hist;
  GapMetrics gap;

  std::vector<double> train_for(std::size_t d) const { return select(train, train_disc, d); }
  std::vector<double> holdout_for(std::size_t d) const {
    return select(holdout, holdout_disc, d);
  }

 private:
  static std::vector<double> select(const std::vector<double>& v,
                                    const std::vector<std::size_t>& owner, std::size_t d) {
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (owner[i] == d) out.push_back(v[i]);
    }
    return out;
  }
};

// Equal-width bins over [lo, hi); the last bin is closed at hi. Values
// outside the range land in the end bins.
inline std::vector<double> bin_edges(std::size_t bins, double lo = 0.0, double hi = 1.0) {
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  edges[bins] = hi;
  return edges;
}

// Binning is done against bin_edges() so counts agree with the emitted edges.
inline std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins,
                                          double lo = 0.0, double hi = 1.0) {
  detail::require(bins >= 1, "histogram needs at least one bin");
  detail::require(lo < hi, "histogram range must satisfy lo < hi");
  const auto edges = bin_edges(bins, lo, hi);
  std::vector<std::size_t> counts(bins, 0);
  for (double s : scores) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), s);
    std::size_t b = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= bins) b = bins - 1;
    ++counts[b];
  }
  return counts;
}

// 1-D Wasserstein-1 distance between two empirical samples:
// integral over u in (0,1) of |F^-1(u) - G^-1(u)|. For equal sizes this is
// the mean absolute difference of the sorted samples.
inline double w1_distance(std::span<const double> a, std::span<const double> b) {
  detail::require(!a.empty() && !b.empty(), "w1_distance of an empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - y[i]);
    return sum / static_cast<double>(x.size());
  }
  // Walk the merged quantile breakpoints i/n and j/m.
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double u = 0.0, total = 0.0;
  while (i < x.size() && j < y.size()) {
    const double next_x = static_cast<double>(i + 1) / n;
    const double next_y = static_cast<double>(j + 1) / m;
    const double next = std::min(next_x, next_y);
    total += (next - u) * std::abs(x[i] - y[j]);
    u = next;
    if (next_x <= next) ++i;
    if (next_y <= next) ++j;
  }
  return total;
}

inline GapMetrics gap_metrics(std::span<const double> train, std::span<const double> holdout) {
  detail::require(!train.empty() && !holdout.empty(), "gap_metrics needs both sides");
  auto mean = [](std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  return {mean(train) - mean(holdout), w1_distance(train, holdout)};
}

inline GapMetrics gap_metrics(const ScoreReport& report) {
  return gap_metrics(report.train, report.holdout);
}

inline ScoreReport collect_scores(const TrainedModel& model, const Dataset& train,
                                  const Dataset& holdout, HoldoutMode mode = HoldoutMode::kFolds,
                                  std::size_t bins = kDefaultBins) {
  const std::size_t k = model.discriminators.size();
  if (k == 0) throw ContractError("collect_scores: model has no discriminators");
  if (train.size() == 0 || holdout.size() == 0) throw ContractError("collect_scores: empty data");
  if (model.partitions.parts.size() != k) {
    throw ContractError("collect_scores: partition count does not match discriminators");
  }
  if (mode == HoldoutMode::kFolds && holdout.size() < k) {
    throw ContractError("collect_scores: holdout needs at least k samples");
  }
  const ObjectiveKind kind = model.objective().kind;
  auto report_value = [kind](double raw) {
    return kind == ObjectiveKind::kWasserstein ? stable_sigmoid(raw) : raw;
  };
  ScoreReport r;
  for (std::size_t d = 0; d < k; ++d) {
    const auto& idx = model.partitions.parts[d];
    if (!idx.empty()) {
      const auto s = discriminator_forward(model.config.discriminator, model.discriminators[d],
                                           train.samples.gather_rows(idx), kind);
      for (double v : s) {
        r.train_raw.push_back(v);
        r.train.push_back(report_value(v));
        r.train_disc.push_back(d);
      }
    }
    std::vector<std::size_t> rows;
    if (mode == HoldoutMode::kFolds) {
      const std::size_t lo = d * holdout.size() / k;
      const std::size_t hi = (d + 1) * holdout.size() / k;
      rows.resize(hi - lo);
      std::iota(rows.begin(), rows.end(), lo);
    } else {
      rows.resize(holdout.size());
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    const auto s = discriminator_forward(model.config.discriminator, model.discriminators[d],
                                         holdout.samples.gather_rows(rows), kind);
    for (double v : s) {
      r.holdout_raw.push_back(v);
      r.holdout.push_back(report_value(v));
      r.holdout_disc.push_back(d);
    }
  }
  r.hist.edges = bin_edges(bins);
  r.hist.train_counts = histogram(r.train, bins);
  r.hist.holdout_counts = histogram(r.holdout, bins);
  r.gap = gap_metrics(r);
  return r;
}

// ---------------------------------------------------------------------------
// Report files

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string scores_csv(const ScoreReport& r, const std::string& preamble) {
  std::string out = preamble;
  out += "side,discriminator_index,score,score_raw\n";
  auto rows = [&](const char* side, const std::vector<double>& s, const std::vector<double>& raw,
                  const std::vector<std::size_t>& disc) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += side;
      out += ',' + std::to_string(disc[i]) + ',' + detail::fmt_double(s[i]) + ',' +
             detail::fmt_double(raw[i]) + '\n';
    }
  };
  rows("train", r.train, r.train_raw, r.train_disc);
  rows("holdout", r.holdout, r.holdout_raw, r.holdout_disc);
  return out;
}

inline std::string hist_csv(const ScoreReport& r, const std::string& preamble) {
  std::string out = preamble;
  out += "bin_lo,bin_hi,train_count,holdout_count\n";
  for (std::size_t b = 0; b + 1 < r.hist.edges.size(); ++b) {
    out += detail::fmt_double(r.hist.edges[b]) + ',' + detail::fmt_double(r.hist.edges[b + 1]) +
           ',' + std::to_string(r.hist.train_counts[b]) + ',' +
           std::to_string(r.hist.holdout_counts[b]) + '\n';
  }
  return out;
}

}  // namespace mgmd
