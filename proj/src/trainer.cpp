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

#include "pad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "pad/significance.hpp"

namespace pad {
namespace {

using Mat = Matrix<float>;

struct Optimizer {
  const TrainConfig& cfg;
  std::vector<Mat> m, v;
  long step = 0;

  void apply(EncoderParams<float>& params, const std::vector<Mat>& grads) {
    auto tensors = params.tensors();
    ++step;
    if (cfg.optimizer == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < tensors.size(); ++i) *tensors[i] -= float(cfg.learning_rate) * grads[i];
      return;
    }
    if (m.empty()) {
      for (auto* t : tensors) {
        m.push_back(Mat::Zero(t->rows(), t->cols()));
        v.push_back(Mat::Zero(t->rows(), t->cols()));
      }
    }
    const auto& a = cfg.adam;
    const double c1 = 1.0 - std::pow(a.beta1, double(step));
    const double c2 = 1.0 - std::pow(a.beta2, double(step));
    const float step_size = float(cfg.learning_rate / c1);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      m[i] = float(a.beta1) * m[i] + float(1.0 - a.beta1) * grads[i];
      v[i] = float(a.beta2) * v[i] + float(1.0 - a.beta2) * grads[i].cwiseAbs2();
      const Mat denom = (v[i] / float(c2)).cwiseSqrt().array() + float(a.epsilon);
      *tensors[i] -= step_size * m[i].cwiseQuotient(denom);
    }
  }
};

std::vector<TeacherTargets<float>> teacherTargets(const TrainConfig& cfg, const EncoderParams<float>& teacher,
                                                  const Dataset& data, const IdfTable& idf) {
  bool needs_idf = false;
  for (const auto& [variant, w] : cfg.loss.components) needs_idf = needs_idf || variant == Variant::TLocalIdf;
  std::vector<TeacherTargets<float>> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    auto encoded = encodeTeacher(teacher, ex.text);
    TeacherTargets<float> t;
    const auto n = encoded.hidden.rows();
    t.prior = cfg.loss_options.text_prior ? asp(encoded.attention, cfg.loss_options.layer_mode)
                                          : SignificancePrior<float>::uniform(n);
    t.hidden = std::move(encoded.hidden);
    if (needs_idf) t.idf_weights = idf.weights(ex.text, true).cast<float>();
    out.push_back(std::move(t));
  }
  return out;
}

Mat meanRow(const Mat& h) {
  return (h.cast<double>().colwise().sum() / double(h.rows())).cast<float>();
}

Mat normalizedRows(const Mat& x) {
  Mat out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const float norm = out.row(r).norm();
    if (norm > 0.0f) out.row(r) /= norm;
  }
  return out;
}

struct FrameCounts {
  long correct = 0;
  long total = 0;
};

FrameCounts countFrames(const Mat& speech, const Mat& text, const std::vector<int>& gold) {
  require(gold.size() == std::size_t(speech.rows()), "evalFrameAlignment: gold length must equal frame count");
  require(speech.cols() == text.cols(), "evalFrameAlignment: embedding widths differ");
  const Mat sim = normalizedRows(speech) * normalizedRows(text).transpose();
  FrameCounts c;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    const int g = gold[std::size_t(i)];
    if (g < 0) continue;
    require(g < text.rows(), "evalFrameAlignment: gold index out of range");
    Eigen::Index best;
    sim.row(i).maxCoeff(&best);
    c.correct += best == g;
    ++c.total;
  }
  return c;
}

std::string where(int epoch, long step) {
  std::ostringstream os;
  os << "training diverged at epoch " << epoch << ", step " << step << ": ";
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  loss.validate();
  loss_options.span.validate();
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "TrainConfig: learning rate must be positive");
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
          "TrainConfig: Adam moments must be in [0, 1)");
  require(adam.epsilon > 0.0, "TrainConfig: Adam epsilon must be positive");
  require(num_pairs >= 3, "TrainConfig: num_pairs must be >= 3");
  require(dev_fraction > 0.0 && dev_fraction < 1.0, "TrainConfig: dev_fraction must be in (0, 1)");
  require(std::llround(dev_fraction * num_pairs) >= 2 && std::llround(dev_fraction * num_pairs) < num_pairs,
          "TrainConfig: num_pairs * dev_fraction must leave at least two dev and one training example");
  data.validate();
  teacher.validate();
  student.validate();
  require(teacher.model_dim == student.model_dim, "TrainConfig: teacher and student model_dim must match");
}

void writeMetricsCsv(const MetricsHistory& history, std::ostream& out) {
  out << "epoch,train_loss,dev_loss,retrieval_acc,frame_acc\n";
  out << std::setprecision(9);
  for (const auto& m : history) {
    out << m.epoch << ',' << m.train_loss << ',' << m.dev_loss << ',' << m.retrieval_acc << ',' << m.frame_acc << '\n';
  }
}

double evalRetrieval(const Mat& student_pooled, const Mat& teacher_pooled) {
  require(student_pooled.rows() >= 2, "evalRetrieval: batch must hold at least two items");
  require(student_pooled.rows() == teacher_pooled.rows() && student_pooled.cols() == teacher_pooled.cols(),
          "evalRetrieval: student and teacher batches differ in shape");
  const Mat sim = normalizedRows(student_pooled) * normalizedRows(teacher_pooled).transpose();
  long hits = 0;
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    Eigen::Index best;
    sim.row(i).maxCoeff(&best);
    hits += best == i;
  }
  return double(hits) / double(sim.rows());
}

double evalFrameAlignment(const Mat& speech, const Mat& text, const std::vector<int>& gold) {
  const auto c = countFrames(speech, text, gold);
  require(c.total > 0, "evalFrameAlignment: no non-blank frames");
  return double(c.correct) / double(c.total);
}

std::uint64_t deriveSeed(std::uint64_t run_seed, SeedStream stream) {
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

TrainResult train(const TrainConfig& cfg, const EncoderParams<float>& teacher, const DatasetSplit& data,
                  EncoderParams<float> student_init, const EpochCallback& on_epoch) {
  cfg.validate();
  require(!data.train.empty(), "train: empty training set");
  require(data.dev.size() >= 2, "train: dev set must hold at least two examples");
  require(teacher.kind == EncoderKind::Teacher && student_init.kind == EncoderKind::Student,
          "train: expected teacher and student parameters");

  TrainResult result;
  result.teacher_digest_before = parameterDigest(teacher);
  result.student = std::move(student_init);

  std::vector<std::vector<int>> train_texts;
  for (const auto& ex : data.train) train_texts.push_back(ex.text);
  const auto idf = IdfTable::fit(train_texts);
  const auto train_targets = teacherTargets(cfg, teacher, data.train, idf);
  const auto dev_targets = teacherTargets(cfg, teacher, data.dev, idf);
  Mat teacher_pooled(Eigen::Index(data.dev.size()), teacher.modelDim());
  for (std::size_t i = 0; i < data.dev.size(); ++i) teacher_pooled.row(Eigen::Index(i)) = meanRow(dev_targets[i].hidden);

  Optimizer optimizer{cfg, {}, {}};
  std::mt19937_64 shuffle_rng(deriveSeed(cfg.seed, SeedStream::Shuffle));
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    long epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const float inv = 1.0f / float(stop - start);
      std::vector<Mat> grads;
      double batch_loss = 0.0;
      ++step;
      for (std::size_t b = start; b < stop; ++b) {
        const auto idx = order[b];
        Graph<float> g;
        auto bound = bindParameters(g, result.student, true);
        double value = 0.0;
        try {
          auto out = encodeFrames(g, bound, data.train[idx].speech);
          auto loss = specLoss(cfg.loss, out, train_targets[idx], cfg.loss_options);
          value = double(loss.value()(0, 0));
          if (!std::isfinite(value)) throw NumericError("non-finite loss");
          g.backward(loss);
        } catch (const NumericError& e) {
          throw TrainingDiverged(where(epoch, step) + e.what());
        }
        batch_loss += value;
        auto example_grads = parameterGrads(bound);
        if (grads.empty()) {
          grads = std::move(example_grads);
          for (auto& gr : grads) gr *= inv;
        } else {
          for (std::size_t k = 0; k < grads.size(); ++k) grads[k] += inv * example_grads[k];
        }
      }
      for (const auto& gr : grads) {
        if (!gr.allFinite()) throw TrainingDiverged(where(epoch, step) + "non-finite gradient");
      }
      optimizer.apply(result.student, grads);
      batch_loss /= double(stop - start);
      result.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss;
      ++epoch_steps;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = epoch_loss / double(epoch_steps);
    Mat student_pooled(Eigen::Index(data.dev.size()), result.student.modelDim());
    FrameCounts frames;
    double dev_loss = 0.0;
    for (std::size_t i = 0; i < data.dev.size(); ++i) {
      Graph<float> g;
      auto bound = bindParameters(g, result.student, false);
      try {
        auto out = encodeFrames(g, bound, data.dev[i].speech);
        dev_loss += double(specLoss(cfg.loss, out, dev_targets[i], cfg.loss_options).value()(0, 0));
        student_pooled.row(Eigen::Index(i)) = meanRow(out.hidden.value());
        const auto c = countFrames(out.hidden.value(), dev_targets[i].hidden, data.dev[i].gold);
        frames.correct += c.correct;
        frames.total += c.total;
      } catch (const NumericError& e) {
        throw TrainingDiverged(where(epoch, step) + "dev evaluation: " + e.what());
      }
    }
    m.dev_loss = dev_loss / double(data.dev.size());
    m.retrieval_acc = evalRetrieval(student_pooled, teacher_pooled);
    m.frame_acc = frames.total ? double(frames.correct) / double(frames.total) : 0.0;
    if (!std::isfinite(m.train_loss) || !std::isfinite(m.dev_loss)) {
      throw TrainingDiverged(where(epoch, step) + "non-finite epoch loss");
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.teacher_digest_after = parameterDigest(teacher);
  return result;
}

Experiment prepareExperiment(const TrainConfig& cfg) {
  cfg.validate();
  auto teacher_cfg = cfg.teacher;
  teacher_cfg.seed = deriveSeed(cfg.seed, SeedStream::Teacher);
  auto student_cfg = cfg.student;
  student_cfg.seed = deriveSeed(cfg.seed, SeedStream::Student);
  auto gen = cfg.data;
  gen.seed = deriveSeed(cfg.seed, SeedStream::Data);

  Experiment ex;
  ex.teacher = initTeacher<float>(teacher_cfg, gen.vocab_size);
  ex.data = splitDataset(generate(gen, cfg.num_pairs, ex.teacher.input), cfg.dev_fraction,
                         deriveSeed(cfg.seed, SeedStream::Split));
  ex.student = initStudent<float>(student_cfg, int(ex.teacher.modelDim()));
  return ex;
}

TrainResult runExperiment(const TrainConfig& cfg, const EpochCallback& on_epoch) {
  auto ex = prepareExperiment(cfg);
  return train(cfg, ex.teacher, ex.data, std::move(ex.student), on_epoch);
}

}  // namespace pad
