// Copyright 2026 The PAD Distillation Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "pad/encoder.hpp"
#include "pad/grad_check.hpp"
#include "support/oracles.hpp"

namespace pad {
namespace {

EncoderConfig tinyConfig(int layers = 2) {
  EncoderConfig cfg;
  cfg.num_layers = layers;
  cfg.num_heads = 2;
  cfg.model_dim = 8;
  cfg.ffn_dim = 16;
  cfg.seed = 42;
  return cfg;
}

TEST(Encoder, TeacherShapesAndStochasticAttention) {
  auto teacher = initTeacher<float>(tinyConfig(), 10);
  const std::vector<int> tokens{1, 4, 4, 9};
  auto out = encodeTeacher(teacher, tokens);
  EXPECT_EQ(out.hidden.rows(), 4);
  EXPECT_EQ(out.hidden.cols(), 8);
  ASSERT_EQ(out.attention.size(), 2u);
  for (const auto& a : out.attention) {
    ASSERT_EQ(a.rows(), 4);
    ASSERT_EQ(a.cols(), 4);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(a.row(i).sum(), 1.0f, 1e-6f);
    EXPECT_TRUE((a.array() >= 0.0f).all() && (a.array() <= 1.0f).all());
  }
}

TEST(Encoder, ZeroLayersIsEmbeddingLookup) {
  auto teacher = initTeacher<float>(tinyConfig(0), 6);
  const std::vector<int> tokens{5, 0, 2};
  auto out = encodeTeacher(teacher, tokens);
  EXPECT_TRUE(out.attention.empty());
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out.hidden.row(i), teacher.input.row(tokens[std::size_t(i)]));
}

TEST(Encoder, DeterministicForSameSeed) {
  const std::vector<int> tokens{3, 1, 2, 7, 7};
  auto a = encodeTeacher(initTeacher<float>(tinyConfig(), 8), tokens);
  auto b = encodeTeacher(initTeacher<float>(tinyConfig(), 8), tokens);
  EXPECT_EQ(a.hidden, b.hidden);
  for (std::size_t l = 0; l < a.attention.size(); ++l) EXPECT_EQ(a.attention[l], b.attention[l]);
}

TEST(Encoder, OutOfVocabularyRejected) {
  auto teacher = initTeacher<float>(tinyConfig(), 5);
  const std::vector<int> bad{1, 5};
  EXPECT_THROW(encodeTeacher(teacher, bad), ContractViolation);
  const std::vector<int> empty;
  EXPECT_THROW(encodeTeacher(teacher, empty), ContractViolation);
}

TEST(Encoder, ConfigValidation) {
  auto cfg = tinyConfig();
  cfg.num_heads = 3;
  EXPECT_THROW(cfg.validate(), ContractViolation);
}

TEST(Encoder, StudentIsTrainableTeacherIsDetached) {
  auto cfg = tinyConfig();
  auto student = initStudent<double>(cfg, 8);
  std::mt19937_64 rng(1);
  const Matrix<double> frames = oracle::randomMatrix(rng, 5, 8);
  Graph<double> g;
  auto bound = bindParameters(g, student, true);
  auto out = encodeFrames(g, bound, frames);
  EXPECT_EQ(out.hidden.rows(), 5);
  EXPECT_TRUE(out.hidden.requiresGrad());
  g.backward(sum(out.hidden));
  for (const auto& grad : parameterGrads(bound)) EXPECT_TRUE(grad.allFinite());

  Graph<double> tg;
  auto teacher = initTeacher<double>(cfg, 4);
  auto tb = bindParameters(tg, teacher, false);
  auto tout = encodeTokens(tg, tb, std::vector<int>{0, 1});
  EXPECT_FALSE(tout.hidden.requiresGrad());
}

TEST(Encoder, StudentParameterGradientsMatchFiniteDifferences) {
  auto cfg = tinyConfig(1);
  auto student = initStudent<double>(cfg, 8);
  std::mt19937_64 rng(2);
  const Matrix<double> frames = oracle::randomMatrix(rng, 4, 8);
  const Matrix<double> weights = oracle::randomMatrix(rng, 4, 8);
  const std::size_t n_tensors = student.tensors().size();
  for (std::size_t k = 0; k < n_tensors; ++k) {
    auto f = [&](Graph<double>& g, const Var<double>& p) {
      auto params = student;
      auto b = bindParameters(g, params, false);
      b.vars[k] = p;
      auto out = encodeFrames(g, b, frames);
      return sum(cwiseProduct(out.hidden, g.constant(weights)));
    };
    auto r = gradCheck(f, *student.tensors()[k], 1e-5);
    EXPECT_TRUE(r.passed(1e-4)) << "tensor " << k << " err " << r.max_rel_error;
  }
}

TEST(Encoder, AttentionMapGradientsMatchFiniteDifferences) {
  auto cfg = tinyConfig(1);
  auto student = initStudent<double>(cfg, 8);
  std::mt19937_64 rng(3);
  const Matrix<double> frames = oracle::randomMatrix(rng, 4, 8);
  const Matrix<double> w = oracle::randomMatrix(rng, 4, 4);
  // Through the input projection into the head-averaged map.
  auto f = [&](Graph<double>& g, const Var<double>& p) {
    auto b = bindParameters(g, student, false);
    b.vars[0] = p;
    auto out = encodeFrames(g, b, frames);
    return sum(cwiseProduct(out.attention[0], g.constant(w)));
  };
  EXPECT_TRUE(gradCheck(f, student.input, 1e-5).passed(1e-4));
}

TEST(PoolGlobal, Modes) {
  Graph<double> g;
  Matrix<double> h(2, 2);
  h << 1, 2, 3, 4;
  auto hv = g.constant(h);
  EXPECT_EQ(poolGlobal(hv, PoolMode::Avr).value(), (Matrix<double>(1, 2) << 2, 3).finished());
  EXPECT_EQ(poolGlobal(hv, PoolMode::Cls).value(), (Matrix<double>(1, 2) << 1, 2).finished());
  auto one_hot = g.constant((Matrix<double>(2, 1) << 1, 0).finished());
  EXPECT_EQ(poolGlobal(hv, PoolMode::Prior, &one_hot).value(), (Matrix<double>(1, 2) << 1, 2).finished());
  EXPECT_THROW(poolGlobal(hv, PoolMode::Prior), ContractViolation);
}

TEST(PoolGlobal, UniformPriorEqualsAverageExactly) {
  std::mt19937_64 rng(9);
  for (int n = 1; n <= 12; ++n) {
    Graph<double> g;
    auto h = g.constant(oracle::randomMatrix(rng, n, 5));
    auto uniform = g.constant(Matrix<double>::Constant(n, 1, 1.0 / n));
    EXPECT_EQ(poolGlobal(h, PoolMode::Prior, &uniform).value(), poolGlobal(h, PoolMode::Avr).value());
  }
}

TEST(Encoder, DigestDetectsChanges) {
  auto teacher = initTeacher<float>(tinyConfig(), 5);
  const auto d0 = parameterDigest(teacher);
  EXPECT_EQ(d0, parameterDigest(initTeacher<float>(tinyConfig(), 5)));
  teacher.layers[0].query(0, 0) += 1e-3f;
  EXPECT_NE(d0, parameterDigest(teacher));
}

TEST(LinearProjection, MapsImportedWidth) {
  Graph<float> g;
  auto proj = LinearProjection<float>::random(12, 8, 4);
  auto x = g.constant(Matrix<float>::Ones(3, 12));
  EXPECT_EQ(proj.apply(x).cols(), 8);
  EXPECT_THROW(proj.apply(g.constant(Matrix<float>::Ones(3, 8))), ContractViolation);
}

}  // namespace
}  // namespace pad
