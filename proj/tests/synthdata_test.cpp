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
#include <set>

#include "pad/synthdata.hpp"

namespace pad {
namespace {

Matrix<float> embeddings(int vocab, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Matrix<float> e(vocab, dim);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = n(rng);
  return e;
}

TEST(SynthData, NoiseFreeFixedRepeats) {
  GenConfig cfg;
  cfg.vocab_size = 10;
  cfg.min_text_len = cfg.max_text_len = 3;
  cfg.min_repeat = cfg.max_repeat = 2;
  cfg.blank_prob = 0.0;
  cfg.noise_std = 0.0;
  const auto emb = embeddings(10, 6, 1);
  const auto data = generate(cfg, 4, emb);
  for (const auto& ex : data) {
    ASSERT_EQ(ex.text.size(), 3u);
    ASSERT_EQ(ex.speech.rows(), 6);
    EXPECT_EQ(ex.gold, (std::vector<int>{0, 0, 1, 1, 2, 2}));
    for (Eigen::Index t = 0; t < 6; ++t) {
      EXPECT_EQ(ex.speech.row(t), emb.row(ex.text[std::size_t(ex.gold[std::size_t(t)])]));
    }
  }
}

TEST(SynthData, LengthBounds) {
  GenConfig cfg;
  cfg.min_text_len = cfg.max_text_len = 5;
  cfg.min_repeat = 2;
  cfg.max_repeat = 4;
  cfg.blank_prob = 0.3;
  const auto data = generate(cfg, 200, embeddings(50, 8, 2));
  std::set<Eigen::Index> lengths;
  for (const auto& ex : data) {
    long blanks = std::count(ex.gold.begin(), ex.gold.end(), -1);
    EXPECT_LE(blanks, 6);
    const auto speech_frames = ex.speech.rows() - blanks;
    EXPECT_GE(speech_frames, 10);
    EXPECT_LE(speech_frames, 20);
    lengths.insert(speech_frames);
    for (int t : ex.text) {
      EXPECT_GE(t, 0);
      EXPECT_LT(t, 50);
    }
  }
  EXPECT_GT(lengths.size(), 3u);
}

TEST(SynthData, Deterministic) {
  GenConfig cfg;
  cfg.seed = 77;
  const auto emb = embeddings(50, 8, 3);
  const auto a = generate(cfg, 20, emb);
  const auto b = generate(cfg, 20, emb);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].gold, b[i].gold);
    EXPECT_EQ(a[i].speech, b[i].speech);
  }
  cfg.seed = 78;
  const auto c = generate(cfg, 20, emb);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].text != c[i].text;
  EXPECT_TRUE(differs);
}

TEST(SynthData, GoldIsValidAndNearestEmbeddingRecoversToken) {
  GenConfig cfg;
  cfg.noise_std = 0.1;
  const auto emb = embeddings(50, 32, 4);
  for (const auto& ex : generate(cfg, 50, emb)) {
    ASSERT_TRUE(validGold(ex));
    for (Eigen::Index t = 0; t < ex.speech.rows(); ++t) {
      const int g = ex.gold[std::size_t(t)];
      if (g < 0) continue;
      Eigen::Index best;
      (emb.rowwise() - ex.speech.row(t)).rowwise().squaredNorm().minCoeff(&best);
      EXPECT_EQ(best, ex.text[std::size_t(g)]);
    }
  }
}

TEST(SynthData, ValidGoldRejectsBrokenMaps) {
  PairedExample ex{{3, 4}, Matrix<float>::Zero(4, 2), {0, -1, 1, 1}};
  EXPECT_TRUE(validGold(ex));
  ex.gold = {1, 0, 0, 1};
  EXPECT_FALSE(validGold(ex));
  ex.gold = {0, 0, 0, -1};
  EXPECT_FALSE(validGold(ex));
  ex.gold = {0, 2, 2, 2};
  EXPECT_FALSE(validGold(ex));
  ex.gold = {0, 1, 1};
  EXPECT_FALSE(validGold(ex));
}

TEST(SynthData, SplitIsDisjointAndSeeded) {
  GenConfig cfg;
  auto data = generate(cfg, 40, embeddings(50, 4, 5));
  for (std::size_t i = 0; i < data.size(); ++i) data[i].text.push_back(int(1000 + i));
  const auto s1 = splitDataset(data, 0.25, 9);
  const auto s2 = splitDataset(data, 0.25, 9);
  EXPECT_EQ(s1.train.size(), 30u);
  EXPECT_EQ(s1.dev.size(), 10u);
  std::set<int> ids;
  for (const auto* part : {&s1.train, &s1.dev}) {
    for (const auto& ex : *part) ids.insert(ex.text.back());
  }
  EXPECT_EQ(ids.size(), 40u);
  for (std::size_t i = 0; i < s1.dev.size(); ++i) EXPECT_EQ(s1.dev[i].text, s2.dev[i].text);
  EXPECT_EQ(splitDataset(Dataset(data.begin(), data.begin() + 2), 0.01, 1).dev.size(), 1u);
  EXPECT_THROW(splitDataset(data, 1.0, 1), ContractViolation);
}

TEST(SynthData, ConfigValidation) {
  GenConfig cfg;
  cfg.min_repeat = 3;
  cfg.max_repeat = 2;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = GenConfig{};
  cfg.blank_prob = 1.5;
  EXPECT_THROW(cfg.validate(), ContractViolation);
  cfg = GenConfig{};
  EXPECT_THROW(generate(cfg, 1, embeddings(10, 4, 1)), ContractViolation);
}

}  // namespace
}  // namespace pad
