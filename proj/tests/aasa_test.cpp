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
#include <random>
#include <vector>

#include "pad/aasa.hpp"
#include "support/oracles.hpp"

namespace pad {
namespace {

using Mat = Matrix<double>;

SignificancePrior<double> priorFrom(std::vector<double> w) {
  return {Eigen::Map<Vector<double>>(w.data(), Eigen::Index(w.size()))};
}

SpanConfig spanConfig(int xi, int c = 3) {
  SpanConfig cfg;
  cfg.base_scale = xi;
  cfg.num_scales = c;
  return cfg;
}

TEST(Aasa, UniformPriorTrace) {
  EXPECT_EQ(selectAnchors(SignificancePrior<double>::uniform(12), spanConfig(4)), (std::vector<int>{0, 3, 6, 9}));
}

TEST(Aasa, PeakedPriorTrace) {
  // Order by significance (ties ascending): 5, 7, 6, 0, 1, 2, 3, 4.
  // 5 admitted; 7 and 6 within 2 of 5; 0 admitted; 1, 2 within 2 of 0; 3, 4 within 2 of 5.
  auto prior = priorFrom({.01, .01, .01, .01, .01, .9, .02, .03});
  EXPECT_EQ(selectAnchors(prior, spanConfig(4)), (std::vector<int>{5, 0}));
}

TEST(Aasa, SingleFrame) {
  Graph<double> g;
  Mat s(1, 3);
  s << 0.5, -1.0, 2.0;
  auto pools = aasa(g.constant(s), SignificancePrior<double>::uniform(1), spanConfig(4));
  EXPECT_EQ(pools.anchors, std::vector<int>{0});
  for (Eigen::Index r = 0; r < pools.spans.rows(); ++r) EXPECT_EQ(pools.spans.value().row(r), s.row(0));
}

TEST(Aasa, ScaleSet) {
  EXPECT_EQ(spanConfig(8, 3).halfWidths(), (std::vector<int>{4, 8, 16}));
  EXPECT_EQ(spanConfig(8, 5).halfWidths(), (std::vector<int>{4, 8, 16, 32, 64}));
  EXPECT_EQ(spanConfig(4, 1).halfWidths(), (std::vector<int>{2}));
  auto fixed = spanConfig(8, 3);
  fixed.multi_scale = false;
  EXPECT_EQ(fixed.halfWidths(), (std::vector<int>{4}));
}

TEST(Aasa, ConfigValidation) {
  EXPECT_THROW(spanConfig(3).validate(), ContractViolation);
  EXPECT_THROW(spanConfig(0).validate(), ContractViolation);
  EXPECT_THROW(spanConfig(4, 0).validate(), ContractViolation);
}

TEST(Aasa, EvenStrideAnchors) {
  auto cfg = spanConfig(4);
  cfg.anchor_mode = AnchorMode::EvenStride;
  EXPECT_EQ(selectAnchors(SignificancePrior<double>::uniform(10), cfg), (std::vector<int>{0, 4, 8}));
}

TEST(Aasa, RandomPriorInvariants) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + int(rng() % 40);
    const int xi = 2 * (1 + int(rng() % 5));
    const int c = 1 + int(rng() % 4);
    auto prior = priorFrom(oracle::randomSimplex(rng, std::size_t(n)));
    Graph<double> g;
    auto pools = aasa(g.constant(oracle::randomMatrix(rng, n, 3)), prior, spanConfig(xi, c));
    const auto& a = pools.anchors;
    ASSERT_GE(a.size(), 1u);
    EXPECT_LE(double(a.size()), std::ceil(double(n) / (xi / 2 + 1)) + 1);
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = i + 1; j < a.size(); ++j) EXPECT_GT(std::abs(a[i] - a[j]), xi / 2);
    // The most significant frame is always the first anchor.
    Eigen::Index top;
    prior.weights.maxCoeff(&top);
    EXPECT_EQ(a.front(), int(top));
    EXPECT_EQ(pools.spans.rows(), Eigen::Index(a.size()) * c);
    EXPECT_EQ(pools.spans.cols(), 3);
  }
}

TEST(Aasa, WholeSequenceMeanSpanEqualsGlobalAverage) {
  std::mt19937_64 rng(13);
  Graph<double> g;
  const Mat s = oracle::randomMatrix(rng, 7, 4);
  auto pools = aasa(g.constant(s), SignificancePrior<double>::uniform(7), spanConfig(4, 3));
  // Half-width 8 around any anchor covers all 7 frames.
  const Mat mean = s.colwise().mean();
  for (std::size_t m = 0; m < pools.anchorCount(); ++m) {
    EXPECT_TRUE(pools.spans.value().row(Eigen::Index(m * 3 + 2)).isApprox(mean, 1e-12));
  }
}

TEST(Aasa, MeanPoolingMatchesLoopOracle) {
  std::mt19937_64 rng(14);
  Graph<double> g;
  const int n = 15;
  const Mat s = oracle::randomMatrix(rng, n, 3);
  auto prior = priorFrom(oracle::randomSimplex(rng, n));
  auto pools = aasa(g.constant(s), prior, spanConfig(4, 2));
  for (std::size_t m = 0; m < pools.anchorCount(); ++m) {
    for (std::size_t q = 0; q < 2; ++q) {
      const int half = q == 0 ? 2 : 4;
      const int lo = std::max(0, pools.anchors[m] - half), hi = std::min(n - 1, pools.anchors[m] + half);
      for (int d = 0; d < 3; ++d) {
        double acc = 0.0;
        for (int i = lo; i <= hi; ++i) acc += s(i, d);
        EXPECT_NEAR(pools.spans.value()(Eigen::Index(m * 2 + q), d), acc / (hi - lo + 1), 1e-12);
      }
    }
  }
}

TEST(Aasa, GradientsReachExactlyTheWindow) {
  std::mt19937_64 rng(15);
  const int n = 20;
  const Mat s = oracle::randomMatrix(rng, n, 3);
  auto prior = priorFrom(oracle::randomSimplex(rng, n));
  for (auto pooling : {SpanPooling::Mean, SpanPooling::Max}) {
    auto cfg = spanConfig(4, 2);
    cfg.pooling = pooling;
    std::size_t count = 0;
    {
      Graph<double> probe;
      count = aasa(probe.constant(s), prior, cfg).spans.rows();
    }
    for (std::size_t r = 0; r < count; ++r) {
      Graph<double> g;
      auto x = g.leaf(s);
      auto pools = aasa(x, prior, cfg);
      g.backward(sum(gatherRows(pools.spans, {Eigen::Index(r)})));
      const auto [lo, hi] = pools.window(r / 2, r % 2, n);
      for (int i = 0; i < n; ++i) {
        const bool inside = i >= lo && i <= hi;
        if (!inside) EXPECT_TRUE(x.grad().row(i).isZero()) << "row " << i;
      }
      if (pooling == SpanPooling::Mean) {
        for (int i = lo; i <= hi; ++i) EXPECT_FALSE(x.grad().row(i).isZero());
      } else {
        EXPECT_NEAR(x.grad().sum(), 3.0, 1e-12);
      }
    }
  }
}

TEST(Aasa, MaxPoolingValues) {
  Graph<double> g;
  Mat s(4, 1);
  s << 1, 3, 2, 0;
  auto cfg = spanConfig(2, 1);
  cfg.pooling = SpanPooling::Max;
  auto pools = aasa(g.constant(s), priorFrom({0.1, 0.2, 0.3, 0.4}), cfg);
  // Anchors 3 then 1; windows [2,3] and [0,2].
  EXPECT_EQ(pools.anchors, (std::vector<int>{3, 1}));
  EXPECT_DOUBLE_EQ(pools.spans.value()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(pools.spans.value()(1, 0), 3.0);
}

TEST(Aasa, Errors) {
  Graph<double> g;
  EXPECT_THROW(aasa(g.constant(Mat::Ones(3, 2)), SignificancePrior<double>::uniform(4), spanConfig(4)),
               ContractViolation);
}

}  // namespace
}  // namespace pad
