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

#include <cmath>
#include <limits>
#include <random>

#include "pad/autodiff.hpp"
#include "pad/grad_check.hpp"
#include "support/oracles.hpp"

namespace pad {
namespace {

using Mat = Matrix<double>;

Mat row(std::initializer_list<double> values) {
  Mat m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index j = 0;
  for (double v : values) m(0, j++) = v;
  return m;
}

TEST(AutodiffForward, SoftmaxOfZerosIsUniform) {
  Graph<double> g;
  auto y = softmaxRows(g.constant(row({0.0, 0.0})));
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y.value()(0, 1), 0.5);
}

TEST(AutodiffForward, CosineOfIdenticalVectorsIsOne) {
  Graph<double> g;
  auto c = cosineSimilarity(g.constant(row({1.0, 0.0})), g.constant(row({1.0, 0.0})));
  EXPECT_DOUBLE_EQ(c.item(), 1.0);
}

TEST(AutodiffForward, MatmulHandEvaluation) {
  Graph<double> g;
  Mat a(2, 2), b(2, 1);
  a << 1, 2, 3, 4;
  b << 1, 1;
  auto c = matmul(g.constant(a), g.constant(b));
  ASSERT_EQ(c.rows(), 2);
  ASSERT_EQ(c.cols(), 1);
  EXPECT_DOUBLE_EQ(c.value()(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(c.value()(1, 0), 7.0);
}

TEST(AutodiffForward, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Graph<double> g;
    auto y = softmaxRows(g.constant(oracle::randomMatrix(rng, 4, 1 + trial % 7, 3.0)));
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      EXPECT_NEAR(y.value().row(i).sum(), 1.0, 1e-6);
      EXPECT_TRUE((y.value().row(i).array() >= 0.0).all());
    }
  }
}

TEST(AutodiffForward, LogSumExpIsStableForLargeInputs) {
  Graph<double> g;
  auto y = logSumExpRows(g.constant(row({1000.0, 1000.0})));
  EXPECT_NEAR(y.item(), 1000.0 + std::log(2.0), 1e-9);
}

TEST(AutodiffBackward, QuadraticGradient) {
  Graph<double> g;
  auto x = g.leaf(row({3.0}));
  auto loss = sum(cwiseProduct(x, x));
  g.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(AutodiffBackward, L1SignSubgradient) {
  Graph<double> g;
  auto x = g.leaf(row({2.0, -1.0, 0.0}));
  g.backward(l1Norm(x));
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x.grad()(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(x.grad()(0, 2), 0.0);
}

TEST(AutodiffBackward, ColSumsSpreadsUniformly) {
  Graph<double> g;
  auto x = g.leaf(Mat::Random(3, 2));
  g.backward(sum(scale(colSums(x), 2.0)));
  EXPECT_TRUE(x.grad().isApprox(Mat::Constant(3, 2, 2.0)));
}

TEST(AutodiffBackward, ColMaxRoutesToLowestArgmax) {
  Graph<double> g;
  Mat v(3, 2);
  v << 1, 5, 4, 5, 4, 0;
  auto x = g.leaf(v);
  g.backward(sum(colMax(x)));
  Mat expected(3, 2);
  expected << 0, 1, 1, 0, 0, 0;
  EXPECT_EQ(x.grad(), expected);
}

TEST(AutodiffBackward, SharedInputAccumulates) {
  Graph<double> g;
  auto x = g.leaf(row({1.5, -2.0}));
  g.backward(sum(add(x, x)));
  EXPECT_EQ(x.grad(), row({2.0, 2.0}));
}

TEST(AutodiffBackward, ConstantsReceiveNoGradient) {
  Graph<double> g;
  auto c = g.constant(row({1.0, 2.0}));
  auto x = g.leaf(row({0.5, 0.5}));
  g.backward(sum(cwiseProduct(c, x)));
  EXPECT_EQ(c.grad().size(), 0);
  EXPECT_EQ(x.grad(), row({1.0, 2.0}));
}

TEST(AutodiffErrors, ShapeMismatchIsContractViolation) {
  Graph<double> g;
  auto a = g.constant(Mat::Zero(2, 3));
  auto b = g.constant(Mat::Zero(3, 2));
  EXPECT_THROW(add(a, b), ContractViolation);
  EXPECT_THROW(matmul(a, a), ContractViolation);
  EXPECT_THROW(cosineSimilarity(a, b), ContractViolation);
}

TEST(AutodiffErrors, NonFiniteLeafRejected) {
  Graph<double> g;
  EXPECT_THROW(g.leaf(row({1.0, std::numeric_limits<double>::quiet_NaN()})), NumericError);
  EXPECT_THROW(g.leaf(row({std::numeric_limits<double>::infinity()})), NumericError);
}

TEST(AutodiffErrors, NonFiniteOutputRejected) {
  Graph<double> g;
  EXPECT_THROW(exp(g.constant(row({1e6}))), NumericError);
}

TEST(AutodiffErrors, BackwardRequiresScalar) {
  Graph<double> g;
  auto x = g.leaf(row({1.0, 2.0}));
  EXPECT_THROW(g.backward(x), ContractViolation);
}

TEST(AutodiffErrors, GraphConsumedOnce) {
  Graph<double> g;
  auto x = g.leaf(row({1.0}));
  auto loss = sum(x);
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), ContractViolation);
}

TEST(GradCheck, SumOfSquares) {
  std::mt19937_64 rng(11);
  auto r = gradCheck([](Graph<double>&, const Var<double>& x) { return sum(cwiseProduct(x, x)); },
                     oracle::randomMatrix(rng, 3, 4), 1e-5);
  EXPECT_TRUE(r.passed(1e-4)) << r.max_rel_error;
  EXPECT_EQ(r.kinks, 0u);
}

TEST(GradCheck, CosineSimilarityAtRandomPoint) {
  std::mt19937_64 rng(5);
  const Mat other = oracle::randomMatrix(rng, 3, 4);
  const Mat weights = oracle::randomMatrix(rng, 2, 3);
  auto f = [&](Graph<double>& g, const Var<double>& x) {
    return sum(cwiseProduct(cosineSimilarity(x, g.constant(other)), g.constant(weights)));
  };
  for (double eps : {1e-3, 1e-5}) {
    auto r = gradCheck(f, oracle::randomMatrix(rng, 2, 4), eps);
    EXPECT_TRUE(r.passed(1e-4)) << "eps=" << eps << " err=" << r.max_rel_error;
  }
  // Gradient with respect to the second operand.
  auto f2 = [&](Graph<double>& g, const Var<double>& x) {
    return sum(cwiseProduct(cosineSimilarity(g.constant(other.topRows(2)), x), g.constant(weights)));
  };
  EXPECT_TRUE(gradCheck(f2, oracle::randomMatrix(rng, 3, 4), 1e-5).passed(1e-4));
}

TEST(GradCheck, L1KinkIsFlaggedAndExcluded) {
  Mat x = row({0.7, -0.3, 0.0});
  auto r = gradCheck([](Graph<double>&, const Var<double>& v) { return l1Norm(v); }, x, 1e-5);
  EXPECT_EQ(r.kinks, 1u);
  EXPECT_TRUE(r.passed(1e-4));
}

TEST(GradCheck, NonFiniteEstimateIsReportedAsFailure) {
  // log() leaves its domain once the probe crosses zero.
  auto bad = gradCheck([](Graph<double>&, const Var<double>& x) { return sum(log(x)); }, row({1e-6}), 1e-5);
  EXPECT_FALSE(bad.finite);
  EXPECT_FALSE(bad.passed(1e-4));
}

// Each primitive's backward against finite differences, contracted with a
// random weight matrix to reduce to a scalar.
TEST(GradCheck, Primitives) {
  std::mt19937_64 rng(21);
  const Mat x0 = oracle::randomMatrix(rng, 3, 4);
  const Mat other = oracle::randomMatrix(rng, 3, 4);
  const Mat square = oracle::randomMatrix(rng, 4, 2);
  auto contract = [](Graph<double>& g, const Var<double>& y) {
    std::mt19937_64 local(99);
    return sum(cwiseProduct(y, g.constant(oracle::randomMatrix(local, y.rows(), y.cols()))));
  };
  std::vector<std::pair<const char*, ScalarFunction>> cases = {
      {"sub", [&](Graph<double>& g, const Var<double>& x) { return contract(g, sub(x, g.constant(other))); }},
      {"scale", [&](Graph<double>& g, const Var<double>& x) { return contract(g, scale(x, -1.7)); }},
      {"exp", [&](Graph<double>& g, const Var<double>& x) { return contract(g, exp(x)); }},
      {"log", [&](Graph<double>& g, const Var<double>& x) { return contract(g, log(exp(x))); }},
      {"matmul", [&](Graph<double>& g, const Var<double>& x) { return contract(g, matmul(x, g.constant(square))); }},
      {"transpose", [&](Graph<double>& g, const Var<double>& x) { return contract(g, transpose(x)); }},
      {"softmaxRows", [&](Graph<double>& g, const Var<double>& x) { return contract(g, softmaxRows(x)); }},
      {"logSoftmaxRows", [&](Graph<double>& g, const Var<double>& x) { return contract(g, logSoftmaxRows(x)); }},
      {"logSumExpRows", [&](Graph<double>& g, const Var<double>& x) { return contract(g, logSumExpRows(x)); }},
      {"colMeans", [&](Graph<double>& g, const Var<double>& x) { return contract(g, colMeans(x)); }},
      {"rowSums", [&](Graph<double>& g, const Var<double>& x) { return contract(g, rowSums(x)); }},
      {"colMax", [&](Graph<double>& g, const Var<double>& x) { return contract(g, colMax(x)); }},
      {"rowMax", [&](Graph<double>& g, const Var<double>& x) { return contract(g, rowMax(x)); }},
      {"sliceCols", [&](Graph<double>& g, const Var<double>& x) { return contract(g, sliceCols(x, 1, 2)); }},
      {"gatherRows", [&](Graph<double>& g, const Var<double>& x) { return contract(g, gatherRows(x, {2, 0, 2})); }},
      {"concatCols",
       [&](Graph<double>& g, const Var<double>& x) {
         return contract(g, concatCols(std::vector<Var<double>>{x, g.constant(other), x}));
       }},
      {"addRowVector",
       [&](Graph<double>& g, const Var<double>& x) {
         return contract(g, addRowVector(g.constant(other), colSums(x)));
       }},
      {"scaleRows",
       [&](Graph<double>& g, const Var<double>& x) {
         return contract(g, scaleRows(x, rowSums(cwiseProduct(x, g.constant(other)))));
       }},
      {"relu", [&](Graph<double>& g, const Var<double>& x) { return contract(g, relu(x)); }},
      {"cosine", [&](Graph<double>& g, const Var<double>& x) { return contract(g, cosineSimilarity(x, x)); }},
  };
  for (const auto& [name, f] : cases) {
    auto r = gradCheck(f, x0, 1e-5);
    EXPECT_TRUE(r.passed(1e-4)) << name << " err=" << r.max_rel_error;
  }
}

}  // namespace
}  // namespace pad
