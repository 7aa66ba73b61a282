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

// Reference implementations used only by tests. Each is written
// independently of the library code it checks and favours the obvious
// algorithm over the fast one.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include "mgmd/models.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/numerics/tensor.hpp"

namespace mgmd::oracle {

// Builds a scalar loss node on a fresh tape from the given parameter ids.
using LossBuilder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

inline double eval_loss(const LossBuilder& build, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const Tensor& p : params) ids.push_back(tape.parameter(p));
  return tape.value(build(tape, ids)).item();
}

inline std::vector<Tensor> analytic_grads(const LossBuilder& build,
                                          const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const Tensor& p : params) ids.push_back(tape.parameter(p));
  return tape.backward(build(tape, ids));
}

// Central differences, one coordinate at a time.
inline std::vector<Tensor> numeric_grads(const LossBuilder& build, std::vector<Tensor> params,
                                         double h = 1e-5) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor g(params[t].shape());
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double orig = params[t].data()[i];
      params[t].data()[i] = orig + h;
      const double up = eval_loss(build, params);
      params[t].data()[i] = orig - h;
      const double down = eval_loss(build, params);
      params[t].data()[i] = orig;
      g.data()[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ||a - n|| / max(||a||, ||n||, 1e-6), per tensor; returns the worst. The
// floor keeps exactly-zero gradients (a Wasserstein critic's output bias)
// from turning central-difference roundoff into a large ratio.
inline double max_relative_error(const std::vector<Tensor>& a, const std::vector<Tensor>& n) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      const double x = a[t].data()[i], y = n[t].data()[i];
      diff += (x - y) * (x - y);
      na += x * x;
      nn += y * y;
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-6});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Plain nested-loop MLP forward pass.
inline std::vector<std::vector<double>> mlp_forward(const MlpSpec& spec, const MlpParams& p,
                                                    const Tensor& x, Activation out) {
  std::vector<std::vector<double>> h(x.rows(), std::vector<double>(x.cols()));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) h[r][c] = x.at(r, c);
  }
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const Tensor& w = p.tensors[2 * l];
    const Tensor& b = p.tensors[2 * l + 1];
    std::vector<std::vector<double>> next(h.size(), std::vector<double>(w.cols()));
    for (std::size_t r = 0; r < h.size(); ++r) {
      for (std::size_t j = 0; j < w.cols(); ++j) {
        double s = b.data()[j];
        for (std::size_t i = 0; i < w.rows(); ++i) s += h[r][i] * w.at(i, j);
        const bool last = l + 1 == spec.layers();
        if (!last) {
          s = s > 0 ? s : spec.leaky_alpha * s;
        } else if (out == Activation::kSigmoid) {
          s = 1.0 / (1.0 + std::exp(-s));
        } else if (out == Activation::kTanh) {
          s = std::tanh(s);
        }
        next[r][j] = s;
      }
    }
    h = std::move(next);
  }
  return h;
}

struct Threshold {
  double accuracy = 0.0;
  double threshold = 0.0;
  bool member_if_greater = true;
};

// Tries every candidate threshold and orientation by direct counting.
// Candidate order: ascending threshold, ">=" before "<"; the first maximum
// wins.
inline Threshold exhaustive_threshold(const std::vector<double>& members,
                                      const std::vector<double>& nonmembers) {
  std::set<double> candidates(members.begin(), members.end());
  candidates.insert(nonmembers.begin(), nonmembers.end());
  Threshold best;
  std::size_t best_correct = 0;
  bool have = false;
  const double total = static_cast<double>(members.size() + nonmembers.size());
  for (double t : candidates) {
    for (bool greater : {true, false}) {
      std::size_t correct = 0;
      for (double s : members) correct += greater ? (s >= t) : (s < t);
      for (double s : nonmembers) correct += greater ? !(s >= t) : !(s < t);
      if (!have || correct > best_correct) {
        have = true;
        best_correct = correct;
        best = {static_cast<double>(correct) / total, t, greater};
      }
    }
  }
  return best;
}

// W1 as the integral of |F_a - F_b| over the real line.
inline double w1_cdf(std::vector<double> a, std::vector<double> b) {
  std::vector<double> pts(a.begin(), a.end());
  pts.insert(pts.end(), b.begin(), b.end());
  std::sort(pts.begin(), pts.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  auto cdf = [](const std::vector<double>& v, double x) {
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) /
           static_cast<double>(v.size());
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    total += std::abs(cdf(a, pts[i]) - cdf(b, pts[i])) * (pts[i + 1] - pts[i]);
  }
  return total;
}

// Per-sample binning with the stated edge rule.
inline std::vector<std::size_t> naive_histogram(const std::vector<double>& scores,
                                                std::size_t bins, double lo, double hi) {
  std::vector<std::size_t> counts(bins, 0);
  for (double s : scores) {
    std::size_t chosen = bins - 1;
    if (s < lo) {
      chosen = 0;
    } else {
      for (std::size_t b = 0; b < bins; ++b) {
        const double left = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
        const double right =
            b + 1 == bins ? hi
                          : lo + (hi - lo) * static_cast<double>(b + 1) / static_cast<double>(bins);
        if (s >= left && (s < right || (b + 1 == bins && s <= right))) {
          chosen = b;
          break;
        }
      }
    }
    ++counts[chosen];
  }
  return counts;
}

}  // namespace mgmd::oracle
