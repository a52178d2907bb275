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

// Alignment training: a frozen text teacher, a trainable speech student and
// per-epoch dev metrics.

#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pad/alignment.hpp"
#include "pad/encoder.hpp"
#include "pad/synthdata.hpp"

namespace pad {

enum class OptimizerKind { Sgd, Adam };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  LossSpec loss = LossSpec::single(Variant::PadTLocal);
  LossOptions loss_options;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  AdamConfig adam;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 0;

  // Experiment setup: synthetic corpus and encoder shapes. Teacher and
  // student share model_dim; their seeds are derived from `seed`.
  GenConfig data;
  int num_pairs = 500;
  double dev_fraction = 0.1;
  EncoderConfig teacher;
  EncoderConfig student;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double retrieval_acc = 0.0;
  double frame_acc = 0.0;
};

using MetricsHistory = std::vector<EpochMetrics>;

void writeMetricsCsv(const MetricsHistory& history, std::ostream& out);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  MetricsHistory history;
  std::vector<double> step_losses;
  EncoderParams<float> student;
  std::uint64_t teacher_digest_before = 0;
  std::uint64_t teacher_digest_after = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Teacher parameters are only read. The student starts from `student_init`.
TrainResult train(const TrainConfig& cfg, const EncoderParams<float>& teacher, const DatasetSplit& data,
                  EncoderParams<float> student_init, const EpochCallback& on_epoch = {});

/// Per-component seeds derived from the run seed.
enum class SeedStream : std::uint64_t { Teacher = 1, Data = 2, Split = 3, Student = 4, Shuffle = 5 };
std::uint64_t deriveSeed(std::uint64_t run_seed, SeedStream stream);

struct Experiment {
  EncoderParams<float> teacher;
  EncoderParams<float> student;
  DatasetSplit data;
};

/// Teacher, synthetic corpus rendered from the teacher embeddings, split and
/// student initialisation, all determined by cfg (including cfg.seed).
Experiment prepareExperiment(const TrainConfig& cfg);

TrainResult runExperiment(const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Rows are pooled embeddings of paired items. Fraction of student rows whose
/// cosine-nearest teacher row is their own pair.
double evalRetrieval(const Matrix<float>& student_pooled, const Matrix<float>& teacher_pooled);

/// Fraction of non-blank frames whose cosine-nearest text token is gold.
double evalFrameAlignment(const Matrix<float>& speech, const Matrix<float>& text, const std::vector<int>& gold);

}  // namespace pad
