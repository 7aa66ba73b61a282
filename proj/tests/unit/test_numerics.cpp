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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mgmd/errors.hpp"
#include "mgmd/numerics/optimizer.hpp"
#include "mgmd/numerics/rng.hpp"
#include "mgmd/numerics/tape.hpp"
#include "mgmd/numerics/tensor.hpp"
#include "../oracles.hpp"

namespace mgmd {
namespace {

TEST(Tensor, ConstructionChecksLength) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST(Tensor, GatherRows) {
  const Tensor t = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  const std::vector<std::size_t> idx{2, 0, 2};
  EXPECT_EQ(t.gather_rows(idx), Tensor::matrix({{5, 6}, {1, 2}, {5, 6}}));
  const std::vector<std::size_t> bad{3};
  EXPECT_ANY_THROW(t.gather_rows(bad));
}

TEST(Tape, ForwardValues) {
  Tape tape;
  const NodeId a = tape.constant(Tensor::matrix({{1, -2}, {3, 4}}));
  const NodeId b = tape.constant(Tensor::matrix({{0.5}, {1}}));
  EXPECT_EQ(tape.value(tape.matmul(a, b)), Tensor::matrix({{-1.5}, {5.5}}));
  EXPECT_EQ(tape.value(tape.add(a, a)), Tensor::matrix({{2, -4}, {6, 8}}));
  EXPECT_EQ(tape.value(tape.sub(a, a)), Tensor::matrix({{0, 0}, {0, 0}}));
  EXPECT_EQ(tape.value(tape.mul_scalar(a, 2)), Tensor::matrix({{2, -4}, {6, 8}}));
  EXPECT_EQ(tape.value(tape.relu(a)), Tensor::matrix({{1, 0}, {3, 4}}));
  EXPECT_EQ(tape.value(tape.leaky_relu(a, 0.25)), Tensor::matrix({{1, -0.5}, {3, 4}}));
  EXPECT_DOUBLE_EQ(tape.value(tape.mean(a)).item(), 1.5);
  EXPECT_EQ(tape.value(tape.clamp(a, -1, 3)), Tensor::matrix({{1, -1}, {3, 3}}));
  const NodeId row = tape.constant(Tensor::vector({10, 20}));
  EXPECT_EQ(tape.value(tape.row_broadcast_add(a, row)), Tensor::matrix({{11, 18}, {13, 24}}));
  const NodeId z = tape.constant(Tensor::vector({0.0}));
  EXPECT_DOUBLE_EQ(tape.value(tape.sigmoid(z)).item(), 0.5);
  EXPECT_DOUBLE_EQ(tape.value(tape.tanh(z)).item(), 0.0);
}

TEST(Tape, ShapeErrors) {
  Tape tape;
  const NodeId a = tape.constant(Tensor({2, 3}));
  const NodeId b = tape.constant(Tensor({2, 3}));
  EXPECT_THROW(tape.matmul(a, b), DimensionError);
  EXPECT_THROW(tape.add(a, tape.constant(Tensor({3, 2}))), DimensionError);
  EXPECT_THROW(tape.row_broadcast_add(a, tape.constant(Tensor::vector({1, 2}))), DimensionError);
}

TEST(Tape, LogIsFlooredAndGradientStopsBelowFloor) {
  Tape tape;
  const NodeId x = tape.parameter(Tensor::vector({0.0, 1e-20, 0.5}));
  const NodeId y = tape.log(x);
  EXPECT_DOUBLE_EQ(tape.value(y).data()[0], std::log(kLogFloor));
  EXPECT_DOUBLE_EQ(tape.value(y).data()[1], std::log(kLogFloor));
  const auto g = tape.backward(tape.mean(y));
  EXPECT_EQ(g[0].data()[0], 0.0);
  EXPECT_EQ(g[0].data()[1], 0.0);
  EXPECT_DOUBLE_EQ(g[0].data()[2], 1.0 / 3.0 / 0.5);
}

TEST(Tape, NonFiniteOutputNamesTheOp) {
  Tape tape;
  const NodeId x = tape.constant(Tensor::vector({1e308}));
  try {
    tape.mul_scalar(x, 10.0);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("op #1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("mul_scalar"), std::string::npos) << e.what();
  }
}

TEST(Tape, BackwardRequiresScalarLoss) {
  Tape tape;
  const NodeId x = tape.parameter(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(tape.relu(x)), ContractError);
}

TEST(Tape, BackwardIsReplayableAndZeroForUnreachedParameters) {
  Tape tape;
  const NodeId a = tape.parameter(Tensor::matrix({{1, 2}, {3, 4}}));
  const NodeId unused = tape.parameter(Tensor::vector({7, 8, 9}));
  (void)unused;
  const NodeId loss = tape.mean(tape.sigmoid(tape.matmul(a, a)));
  const auto g1 = tape.backward(loss);
  const auto g2 = tape.backward(loss);
  ASSERT_EQ(g1.size(), 2u);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(g1[1], Tensor({3}, 0.0));
}

TEST(Tape, ReusedNodeAccumulatesGradient) {
  Tape tape;
  const NodeId x = tape.parameter(Tensor::vector({3.0}));
  const NodeId y = tape.add(x, x);
  const auto g = tape.backward(tape.mean(tape.add(y, x)));
  EXPECT_DOUBLE_EQ(g[0].item(), 3.0);
}

// Each op in isolation against central differences.
TEST(Tape, EveryOpMatchesFiniteDifferences) {
  Rng rng(11);
  using oracle::LossBuilder;
  const std::vector<std::pair<const char*, LossBuilder>> cases = {
      {"matmul", [](Tape& t, const std::vector<NodeId>& p) { return t.mean(t.matmul(p[0], p[1])); }},
      {"add", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.sigmoid(t.add(p[0], t.mul_scalar(p[0], 0.3))));
       }},
      {"sub", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.tanh(t.sub(p[0], t.mul_scalar(p[0], 2.0))));
       }},
      {"broadcast", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.sigmoid(t.row_broadcast_add(t.matmul(p[0], p[1]), p[2])));
       }},
      {"leaky_relu", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.leaky_relu(t.matmul(p[0], p[1]), 0.2));
       }},
      {"relu", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.relu(t.matmul(p[0], p[1])));
       }},
      {"log_sigmoid", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.log(t.sigmoid(t.matmul(p[0], p[1]))));
       }},
      {"clamp", [](Tape& t, const std::vector<NodeId>& p) {
         return t.mean(t.sigmoid(t.clamp(t.matmul(p[0], p[1]), -0.5, 0.5)));
       }},
  };
  for (const auto& [name, build] : cases) {
    const std::vector<Tensor> params = {oracle::random_tensor({3, 4}, rng),
                                        oracle::random_tensor({4, 2}, rng),
                                        oracle::random_tensor({2}, rng)};
    const double err = oracle::max_relative_error(oracle::analytic_grads(build, params),
                                                  oracle::numeric_grads(build, params));
    EXPECT_LT(err, 1e-6) << name;
  }
}

TEST(Rng, DeterministicAndStreamsDiffer) {
  Rng a(5), b(5), c(Rng::derive(5, 1));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng d(5);
  EXPECT_NE(d.next_u64(), c.next_u64());
  EXPECT_NE(Rng::derive(5, 1), Rng::derive(5, 2));
  EXPECT_NE(Rng::derive(5, 1), Rng::derive(6, 1));
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(42);
  double sum = 0, sq = 0, nsum = 0, nsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
    const double z = rng.normal();
    nsum += z;
    nsq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
  EXPECT_NEAR(sq / n - 0.25, 1.0 / 12.0, 0.005);
  EXPECT_NEAR(nsum / n, 0.0, 0.01);
  EXPECT_NEAR(nsq / n, 1.0, 0.01);
}

TEST(Rng, IndexIsInRangeAndRoughlyUniform) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto k = rng.index(7);
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(9);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(std::span(w));
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Optimizer, SgdStep) {
  OptimizerState st(OptimizerSettings{OptimizerKind::kSgd, 0.1, 0.5, 0.999, 1e-8});
  std::vector<Tensor> p{Tensor::vector({1.0, -2.0})};
  const std::vector<Tensor> g{Tensor::vector({0.5, 1.0})};
  optimizer_step(st, p, g);
  EXPECT_DOUBLE_EQ(p[0].data()[0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p[0].data()[1], -2.0 - 0.1);
}

// Scalar Adam written out from its textbook definition.
TEST(Optimizer, AdamMatchesScalarReference) {
  const OptimizerSettings s{OptimizerKind::kAdam, 0.01, 0.5, 0.999, 1e-8};
  OptimizerState st(s);
  std::vector<Tensor> p{Tensor::vector({0.3, -1.2, 2.0})};
  std::vector<double> ref = {0.3, -1.2, 2.0}, m(3, 0.0), v(3, 0.0);
  Rng rng(1);
  for (int step = 1; step <= 25; ++step) {
    std::vector<double> gv(3);
    for (double& x : gv) x = rng.normal();
    optimizer_step(st, p, std::vector<Tensor>{Tensor::vector(gv)});
    for (int i = 0; i < 3; ++i) {
      m[i] = s.beta1 * m[i] + (1 - s.beta1) * gv[i];
      v[i] = s.beta2 * v[i] + (1 - s.beta2) * gv[i] * gv[i];
      const double mh = m[i] / (1 - std::pow(s.beta1, step));
      const double vh = v[i] / (1 - std::pow(s.beta2, step));
      ref[i] -= s.learning_rate * mh / (std::sqrt(vh) + s.epsilon);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[0].data()[i], ref[i], 1e-12);
  EXPECT_EQ(st.step, 25u);
}

TEST(Optimizer, RejectsMismatchedInputs) {
  OptimizerState st{OptimizerSettings{}};
  std::vector<Tensor> p{Tensor::vector({1.0})};
  EXPECT_THROW(optimizer_step(st, p, std::vector<Tensor>{}), ContractError);
  EXPECT_THROW(optimizer_step(st, p, std::vector<Tensor>{Tensor::vector({1.0, 2.0})}),
               ContractError);
  OptimizerState bad(OptimizerSettings{OptimizerKind::kAdam, 0.0});
  EXPECT_THROW(optimizer_step(bad, p, std::vector<Tensor>{Tensor::vector({1.0})}), ContractError);
}

TEST(Optimizer, ClipWeights) {
  std::vector<Tensor> p{Tensor::vector({-0.5, 0.005, 0.02}), Tensor::vector({0.01})};
  clip_weights(p, 0.01);
  EXPECT_EQ(p[0], Tensor::vector({-0.01, 0.005, 0.01}));
  EXPECT_EQ(p[1], Tensor::vector({0.01}));
  EXPECT_THROW(clip_weights(p, 0.0), ContractError);
}

}  // namespace
}  // namespace mgmd
