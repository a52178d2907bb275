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

#include "pad/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pad {

void GenConfig::validate() const {
  require(vocab_size > 0, "GenConfig: vocab_size must be positive");
  require(min_text_len >= 1 && max_text_len >= min_text_len, "GenConfig: invalid text length range");
  require(min_repeat >= 1 && max_repeat >= min_repeat, "GenConfig: invalid repeat range");
  require(blank_prob >= 0.0 && blank_prob <= 1.0, "GenConfig: blank_prob must be in [0, 1]");
  require(noise_std >= 0.0 && blank_std >= 0.0, "GenConfig: noise must be nonnegative");
}

Dataset generate(const GenConfig& cfg, int count, const Matrix<float>& token_embeddings) {
  cfg.validate();
  require(count >= 0, "generate: count must be nonnegative");
  require(token_embeddings.rows() >= cfg.vocab_size, "generate: embedding table smaller than vocabulary");
  const Eigen::Index dim = token_embeddings.cols();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> token_dist(0, cfg.vocab_size - 1);
  std::uniform_int_distribution<int> len_dist(cfg.min_text_len, cfg.max_text_len);
  std::uniform_int_distribution<int> rep_dist(cfg.min_repeat, cfg.max_repeat);
  std::bernoulli_distribution blank_dist(cfg.blank_prob);
  std::normal_distribution<double> unit(0.0, 1.0);

  Dataset out;
  out.reserve(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    PairedExample ex;
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i) ex.text.push_back(token_dist(rng));

    std::vector<Eigen::VectorXf> frames;
    auto push_blank = [&] {
      Eigen::VectorXf f(dim);
      for (Eigen::Index k = 0; k < dim; ++k) f(k) = static_cast<float>(cfg.blank_std * unit(rng));
      frames.push_back(std::move(f));
      ex.gold.push_back(-1);
    };
    for (int i = 0; i < len; ++i) {
      if (blank_dist(rng)) push_blank();
      const int reps = rep_dist(rng);
      for (int r = 0; r < reps; ++r) {
        Eigen::VectorXf f = token_embeddings.row(ex.text[static_cast<std::size_t>(i)]).transpose();
        if (cfg.noise_std > 0.0) {
          for (Eigen::Index k = 0; k < dim; ++k) f(k) += static_cast<float>(cfg.noise_std * unit(rng));
        }
        frames.push_back(std::move(f));
        ex.gold.push_back(i);
      }
    }
    if (blank_dist(rng)) push_blank();

    ex.speech.resize(static_cast<Eigen::Index>(frames.size()), dim);
    for (std::size_t t = 0; t < frames.size(); ++t) ex.speech.row(static_cast<Eigen::Index>(t)) = frames[t].transpose();
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetSplit splitDataset(Dataset data, double dev_fraction, std::uint64_t seed) {
  require(dev_fraction >= 0.0 && dev_fraction < 1.0, "splitDataset: dev_fraction must be in [0, 1)");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::shuffle(data.begin(), data.end(), rng);
  auto dev_count = static_cast<std::size_t>(std::llround(dev_fraction * double(data.size())));
  if (dev_fraction > 0.0 && data.size() >= 2) dev_count = std::max<std::size_t>(dev_count, 1);
  DatasetSplit split;
  const auto cut = data.size() - dev_count;
  split.train.assign(std::make_move_iterator(data.begin()), std::make_move_iterator(data.begin() + long(cut)));
  split.dev.assign(std::make_move_iterator(data.begin() + long(cut)), std::make_move_iterator(data.end()));
  return split;
}

bool validGold(const PairedExample& ex) {
  if (ex.gold.size() != static_cast<std::size_t>(ex.speech.rows())) return false;
  if (ex.gold.size() < ex.text.size()) return false;
  int expected_next = 0;
  int last = -1;
  for (int g : ex.gold) {
    if (g == -1) continue;
    if (g < last) return false;
    if (g != last) {
      if (g != expected_next) return false;
      ++expected_next;
      last = g;
    }
  }
  return expected_next == static_cast<int>(ex.text.size());
}

}  // namespace pad
