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

#include <cmath>

#include "mgmd/errors.hpp"
#include "mgmd/models.hpp"
#include "../oracles.hpp"

namespace mgmd {
namespace {

TEST(Mlp, InitShapesAndDeterminism) {
  const MlpSpec spec{{3, 5, 2}, 0.2, Activation::kSigmoid};
  const MlpParams p = init_params(spec, 4);
  ASSERT_EQ(p.tensors.size(), 4u);
  EXPECT_EQ(p.weight(0).shape(), (Shape{3, 5}));
  EXPECT_EQ(p.bias(0).shape(), (Shape{5}));
  EXPECT_EQ(p.weight(1).shape(), (Shape{5, 2}));
  for (double b : p.bias(1).data()) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(p, init_params(spec, 4));
  EXPECT_NE(p, init_params(spec, 5));
  EXPECT_NO_THROW(check_params(spec, p));
  EXPECT_ANY_THROW(check_params(MlpSpec{{3, 4, 2}}, p));
}

TEST(Mlp, HeScaling) {
  const MlpSpec spec{{200, 300, 1}};
  const MlpParams p = init_params(spec, 1);
  double sq = 0.0;
  for (double w : p.weight(0).data()) sq += w * w;
  EXPECT_NEAR(sq / p.weight(0).size(), 2.0 / 200.0, 0.0005);
}

TEST(Mlp, InvalidSpecs) {
  EXPECT_THROW(init_params(MlpSpec{{3}}, 0), ContractError);
  EXPECT_THROW(init_params(MlpSpec{{3, 0, 1}}, 0), ContractError);
}

TEST(Mlp, ForwardMatchesNestedLoops) {
  Rng rng(7);
  for (Activation out : {Activation::kSigmoid, Activation::kTanh, Activation::kIdentity}) {
    const MlpSpec spec{{4, 6, 5, 3}, 0.1, out};
    MlpParams p = init_params(spec, 9);
    for (std::size_t i = 1; i < p.tensors.size(); i += 2) {
      for (double& b : p.tensors[i].data()) b = rng.normal();
    }
    const Tensor x = oracle::random_tensor({7, 4}, rng);
    const Tensor y = mlp_forward(spec, p, x, out);
    const auto ref = oracle::mlp_forward(spec, p, x, out);
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(y.at(r, c), ref[r][c], 1e-12);
    }
  }
}

TEST(Mlp, WrongInputWidth) {
  const MlpSpec spec{{4, 3, 1}};
  EXPECT_ANY_THROW(mlp_forward(spec, init_params(spec, 0), Tensor({2, 5}), Activation::kSigmoid));
}

TEST(Models, DiscriminatorOutputFollowsObjective) {
  const MlpSpec spec{{2, 8, 1}};
  MlpParams p = init_params(spec, 3);
  for (double& w : p.tensors[2].data()) w *= 50.0;
  Rng rng(2);
  const Tensor x = oracle::random_tensor({64, 2}, rng, 3.0);
  const auto js = discriminator_forward(spec, p, x, ObjectiveKind::kJs);
  const auto w = discriminator_forward(spec, p, x, ObjectiveKind::kWasserstein);
  bool unbounded = false;
  for (std::size_t i = 0; i < js.size(); ++i) {
    EXPECT_GE(js[i], 0.0);
    EXPECT_LE(js[i], 1.0);
    EXPECT_NEAR(js[i], stable_sigmoid(w[i]), 1e-12);
    unbounded |= w[i] > 1.0 || w[i] < 0.0;
  }
  EXPECT_TRUE(unbounded);
  EXPECT_THROW(discriminator_forward(MlpSpec{{2, 3, 2}}, init_params(MlpSpec{{2, 3, 2}}, 0), x,
                                     ObjectiveKind::kJs),
               ContractError);
}

TEST(Models, GeneratorSamplesInUnitBox) {
  const MlpSpec spec{{8, 16, 2}, 0.2, Activation::kSigmoid};
  const Tensor s = sample_generator(spec, init_params(spec, 1), NoisePrior{8}, 500, 3);
  EXPECT_EQ(s.rows(), 500u);
  for (double v : s.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Models, EnsembleSamplingPicksGeneratorsUniformly) {
  const MlpSpec spec{{4, 8, 2}, 0.2, Activation::kSigmoid};
  std::vector<MlpParams> gens;
  for (int i = 0; i < 4; ++i) gens.push_back(init_params(spec, 10 + i));
  const auto e = sample_ensemble(spec, gens, NoisePrior{4}, 8000, 5);
  std::vector<int> counts(4, 0);
  for (auto s : e.source) ++counts[s];
  for (int c : counts) EXPECT_NEAR(c, 2000, 200);
  // Row i equals generator source[i] applied to latent row i.
  Rng noise(Rng::derive(5, 1));
  const Tensor z = sample_noise(NoisePrior{4}, 8000, noise);
  for (std::size_t i : {0u, 17u, 7999u}) {
    const std::vector<std::size_t> row{i};
    const Tensor x = generator_forward(spec, gens[e.source[i]], z.gather_rows(row));
    EXPECT_EQ(x.at(0, 0), e.samples.at(i, 0));
    EXPECT_EQ(x.at(0, 1), e.samples.at(i, 1));
  }
  const auto again = sample_ensemble(spec, gens, NoisePrior{4}, 8000, 5);
  EXPECT_EQ(again.samples, e.samples);
  EXPECT_THROW(sample_ensemble(spec, std::span<const MlpParams>(), NoisePrior{4}, 3, 0),
               ContractError);
}

}  // namespace
}  // namespace mgmd
