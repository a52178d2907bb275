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

// Synthetic paired speech/text data with exact frame-to-token alignments.
//
// Each text token is rendered as a run of noisy copies of its embedding;
// blank frames (pure noise, gold = -1) are optionally inserted before runs.

#pragma once

#include <cstdint>
#include <vector>

#include "pad/autodiff.hpp"

namespace pad {

struct GenConfig {
  int vocab_size = 50;
  int min_text_len = 4;
  int max_text_len = 8;
  int min_repeat = 2;
  int max_repeat = 4;
  double blank_prob = 0.2;
  double noise_std = 0.1;
  double blank_std = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PairedExample {
  std::vector<int> text;
  Matrix<float> speech;   // n_s x d_in
  std::vector<int> gold;  // per frame: token index, or -1 for blank frames
};

using Dataset = std::vector<PairedExample>;

/// token_embeddings is vocab x d_in (typically the teacher embedding table).
Dataset generate(const GenConfig& cfg, int count, const Matrix<float>& token_embeddings);

struct DatasetSplit {
  Dataset train;
  Dataset dev;
};

/// Seeded shuffle, then the last dev_fraction of examples (at least one if
/// the dataset has two or more) goes to dev.
DatasetSplit splitDataset(Dataset data, double dev_fraction, std::uint64_t seed);

/// Gold is a monotone surjection onto token indices over non-blank frames.
bool validGold(const PairedExample& ex);

}  // namespace pad
