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

// Speech-to-text alignment objectives.
//
// Global losses compare pooled sequence embeddings with an L1 distance. Local
// losses score each text token by its best cosine match on the speech side
// (frames or span pools) and combine those scores with per-token weights.
// The ordered losses treat similarities as CTC emission logits.

#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "pad/aasa.hpp"
#include "pad/autodiff.hpp"
#include "pad/encoder.hpp"
#include "pad/significance.hpp"

namespace pad {

/// ||a - b||_1 for two 1 x d rows.
template <typename Scalar>
Var<Scalar> globalL1(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "globalL1: dimension mismatch");
  return l1Norm(sub(a, b));
}

/// globalL1 on prior-weighted sum pools of both sequences. Priors are n x 1 columns.
template <typename Scalar>
Var<Scalar> padGlobal(const Var<Scalar>& speech, const Var<Scalar>& text, const Var<Scalar>& speech_prior,
                      const Var<Scalar>& text_prior) {
  require(speech_prior.rows() == speech.rows(), "padGlobal: speech prior length mismatch");
  require(text_prior.rows() == text.rows(), "padGlobal: text prior length mismatch");
  return globalL1(colSums(applyPrior(speech, speech_prior)), colSums(applyPrior(text, text_prior)));
}

template <typename Scalar>
Var<Scalar> padGlobal(const Var<Scalar>& speech, const Var<Scalar>& text, const SignificancePrior<Scalar>& speech_prior,
                      const SignificancePrior<Scalar>& text_prior) {
  require(speech_prior.size() == speech.rows(), "padGlobal: speech prior length mismatch");
  require(text_prior.size() == text.rows(), "padGlobal: text prior length mismatch");
  auto& g = speech.graph();
  return padGlobal(speech, text, g.constant(speech_prior.column()), g.constant(text_prior.column()));
}

namespace detail {

/// -sum_j w_j max_i sim(i, j)
template <typename Scalar>
Var<Scalar> weightedColumnMax(const Var<Scalar>& sim, const Vector<Scalar>& weights) {
  require(weights.size() == sim.cols(), "weighted local loss: weights length must equal n_t");
  require((weights.array() >= Scalar(0)).all(), "weighted local loss: weights must be nonnegative");
  auto w = sim.graph().constant(Matrix<Scalar>(weights.transpose()));
  return scale(sum(cwiseProduct(colMax(sim), w)), Scalar(-1));
}

}  // namespace detail

/// -sum_j w_j max_i cos(s_i, t_j)
template <typename Scalar>
Var<Scalar> weightedLocal(const Var<Scalar>& speech, const Var<Scalar>& text,
                          const std::type_identity_t<Vector<Scalar>>& weights) {
  require(speech.rows() > 0 && text.rows() > 0, "weightedLocal: empty sequence");
  require(speech.cols() == text.cols(), "weightedLocal: speech and text dims differ");
  return detail::weightedColumnMax(cosineSimilarity(speech, text), weights);
}

/// -(1/n_t) sum_j max_i cos(s_i, t_j). Shares weightedLocal's path with
/// uniform weights so the uniform reduction is exact.
template <typename Scalar>
Var<Scalar> localMaxSim(const Var<Scalar>& speech, const Var<Scalar>& text) {
  require(speech.rows() > 0 && text.rows() > 0, "localMaxSim: empty sequence");
  return weightedLocal(speech, text, SignificancePrior<Scalar>::uniform(text.rows()).weights);
}

/// -sum_j w_j max over every span (all anchors, all scales) of cos(span, t_j).
template <typename Scalar>
Var<Scalar> spanLocal(const SpanPoolSet<Scalar>& pools, const Var<Scalar>& text,
                      const std::type_identity_t<Vector<Scalar>>& weights) {
  require(pools.spans.valid() && pools.spans.rows() > 0, "spanLocal: empty span pool");
  require(pools.spans.cols() == text.cols(), "spanLocal: span and text dims differ");
  return detail::weightedColumnMax(cosineSimilarity(pools.spans, text), weights);
}

// ---------------------------------------------------------------------------
// CTC

class CtcInfeasible : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Frames needed to emit targets: one per label plus a separating blank
/// between equal neighbours.
inline std::size_t ctcRequiredFrames(const std::vector<int>& targets) {
  std::size_t need = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i) need += targets[i] == targets[i - 1];
  return need;
}

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

/// -log p(targets | log_probs) summed over all monotonic CTC paths.
/// log_probs is T x K (per-frame log emission probabilities), blank in [0, K).
/// The recursion runs in log space in double precision.
template <typename Scalar>
Var<Scalar> ctcNegLogLikelihood(const Var<Scalar>& log_probs, std::vector<int> targets, int blank) {
  const Eigen::Index frames = log_probs.rows(), classes = log_probs.cols();
  require(frames > 0, "ctc: no frames");
  require(blank >= 0 && blank < classes, "ctc: blank index out of range");
  for (int t : targets) require(t >= 0 && t < classes && t != blank, "ctc: target label out of range");
  if (static_cast<std::size_t>(frames) < ctcRequiredFrames(targets)) {
    throw CtcInfeasible("ctc: " + std::to_string(targets.size()) + " targets need " +
                        std::to_string(ctcRequiredFrames(targets)) + " frames, got " + std::to_string(frames));
  }
  using detail::kNegInf;
  const Eigen::Index states = 2 * static_cast<Eigen::Index>(targets.size()) + 1;
  std::vector<int> ext(static_cast<std::size_t>(states), blank);
  for (std::size_t i = 0; i < targets.size(); ++i) ext[2 * i + 1] = targets[i];
  auto skip_allowed = [ext](Eigen::Index s) {
    return s >= 2 && ext[static_cast<std::size_t>(s)] != ext[static_cast<std::size_t>(s - 2)];
  };

  const Matrix<double> lp = log_probs.value().template cast<double>();
  Matrix<double> alpha = Matrix<double>::Constant(frames, states, kNegInf);
  alpha(0, 0) = lp(0, ext[0]);
  if (states > 1) alpha(0, 1) = lp(0, ext[1]);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = detail::logAdd(acc, alpha(t - 1, s - 1));
      if (skip_allowed(s)) acc = detail::logAdd(acc, alpha(t - 1, s - 2));
      if (acc != kNegInf) alpha(t, s) = acc + lp(t, ext[static_cast<std::size_t>(s)]);
    }
  }
  double log_likelihood = alpha(frames - 1, states - 1);
  if (states > 1) log_likelihood = detail::logAdd(log_likelihood, alpha(frames - 1, states - 2));
  if (!std::isfinite(log_likelihood)) throw NumericError("ctc: zero path probability");

  Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(-log_likelihood);
  const NodeId il = log_probs.id();
  return log_probs.graph().record(
      "ctc", std::move(out), {log_probs},
      [il, lp, alpha, ext, states, frames, log_likelihood, skip_allowed](Graph<Scalar>& g, NodeId self) {
        // beta(t, s): log prob of emitting frames t+1.. given state s at frame t.
        Matrix<double> beta = Matrix<double>::Constant(frames, states, kNegInf);
        beta(frames - 1, states - 1) = 0.0;
        if (states > 1) beta(frames - 1, states - 2) = 0.0;
        for (Eigen::Index t = frames - 1; t-- > 0;) {
          for (Eigen::Index s = 0; s < states; ++s) {
            double acc = kNegInf;
            for (Eigen::Index next = s; next <= s + 2 && next < states; ++next) {
              if (next == s + 2 && !skip_allowed(next)) continue;
              const double b = beta(t + 1, next);
              if (b == kNegInf) continue;
              acc = detail::logAdd(acc, b + lp(t + 1, ext[static_cast<std::size_t>(next)]));
            }
            beta(t, s) = acc;
          }
        }
        const double upstream = static_cast<double>(g.grad(self)(0, 0));
        Matrix<double> dlp = Matrix<double>::Zero(lp.rows(), lp.cols());
        for (Eigen::Index t = 0; t < frames; ++t) {
          for (Eigen::Index s = 0; s < states; ++s) {
            const double occ = alpha(t, s) + beta(t, s);
            if (occ == kNegInf) continue;
            dlp(t, ext[static_cast<std::size_t>(s)]) -= std::exp(occ - log_likelihood);
          }
        }
        g.accumulate(il, (dlp * upstream).template cast<Scalar>());
      });
}

/// Similarity logits per speech frame plus one constant blank logit, softmaxed
/// per frame, scored with CTC against the given text positions.
template <typename Scalar>
Var<Scalar> ctcOrdered(const Var<Scalar>& sim, std::vector<int> targets, double blank_logit = 0.0) {
  require(sim.rows() > 0 && sim.cols() > 0, "ctcOrdered: empty similarity matrix");
  auto blank = sim.graph().constant(Matrix<Scalar>::Constant(sim.rows(), 1, static_cast<Scalar>(blank_logit)));
  auto log_probs = logSoftmaxRows(concatCols(std::vector<Var<Scalar>>{sim, blank}));
  return ctcNegLogLikelihood(log_probs, std::move(targets), static_cast<int>(sim.cols()));
}

/// Targets 0..n-1: every text position once, in order.
inline std::vector<int> textPositions(Eigen::Index n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
  return out;
}

/// Span rows reordered by anchor position (then scale) to form a frame axis.
template <typename Scalar>
Var<Scalar> spansInTimeOrder(const SpanPoolSet<Scalar>& pools) {
  std::vector<std::size_t> order(pools.anchorCount());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&pools](std::size_t a, std::size_t b) {
    return pools.anchors[a] < pools.anchors[b];
  });
  std::vector<Eigen::Index> rows;
  const std::size_t c = pools.scaleCount();
  for (std::size_t m : order) {
    for (std::size_t q = 0; q < c; ++q) rows.push_back(static_cast<Eigen::Index>(m * c + q));
  }
  return gatherRows(pools.spans, std::move(rows));
}

/// sum_i weight_i * loss_i
template <typename Scalar>
Var<Scalar> jointLoss(const std::vector<std::pair<Var<Scalar>, double>>& components) {
  require(!components.empty(), "jointLoss: no components");
  bool any_positive = false;
  for (const auto& [loss, w] : components) {
    require(w >= 0.0, "jointLoss: weights must be nonnegative");
    require(loss.size() == 1, "jointLoss: components must be scalar");
    any_positive = any_positive || w > 0.0;
  }
  require(any_positive, "jointLoss: at least one weight must be positive");
  Var<Scalar> total;
  for (const auto& [loss, w] : components) {
    auto term = scale(loss, static_cast<Scalar>(w));
    total = total.valid() ? add(total, term) : term;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Variants

enum class Variant { GlobCls, GlobAvr, PadGlob, TLocal, TLocalIdf, PadTLocal, PadSLocal, TLocalOr, SLocalOr };

inline constexpr std::array<std::pair<Variant, std::string_view>, 9> kVariantNames{{
    {Variant::GlobCls, "glob_cls"},
    {Variant::GlobAvr, "glob_avr"},
    {Variant::PadGlob, "pad_glob"},
    {Variant::TLocal, "tlocal"},
    {Variant::TLocalIdf, "tlocal_idf"},
    {Variant::PadTLocal, "pad_tlocal"},
    {Variant::PadSLocal, "pad_slocal"},
    {Variant::TLocalOr, "tlocal_or"},
    {Variant::SLocalOr, "slocal_or"},
}};

inline std::string_view variantName(Variant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  return "unknown";
}

inline std::string variantList() {
  std::string out;
  for (const auto& [variant, name] : kVariantNames) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

class UnknownVariant : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Variant parseVariant(std::string_view name) {
  for (const auto& [variant, canonical] : kVariantNames) {
    if (canonical == name) return variant;
  }
  throw UnknownVariant("unknown variant '" + std::string(name) + "'; valid variants: " + variantList());
}

/// One or more weighted variants; a single component means a plain loss.
struct LossSpec {
  std::vector<std::pair<Variant, double>> components;

  static LossSpec single(Variant v) { return {{{v, 1.0}}}; }

  void validate() const {
    require(!components.empty(), "LossSpec: no components");
    bool positive = false;
    for (const auto& [v, w] : components) {
      require(w >= 0.0, "LossSpec: weights must be nonnegative");
      positive = positive || w > 0.0;
    }
    require(positive, "LossSpec: at least one weight must be positive");
  }

  bool isJoint() const { return components.size() > 1; }

  /// "pad_tlocal" or "pad_glob:1,pad_slocal:0.5".
  std::string describe() const {
    if (!isJoint() && components.front().second == 1.0) return std::string(variantName(components.front().first));
    std::string out;
    for (const auto& [v, w] : components) {
      if (!out.empty()) out += ",";
      out += std::string(variantName(v)) + ":" + std::to_string(w);
    }
    return out;
  }
};

struct LossOptions {
  LayerMode layer_mode = LayerMode::All;
  SpanConfig span;
  bool prior_gradient = false;  // differentiate through the student's own prior
  bool speech_prior = true;     // false: uniform speech prior
  bool text_prior = true;       // false: uniform text weights
  double blank_logit = 0.0;
};

/// Frozen text side of one example.
template <typename Scalar>
struct TeacherTargets {
  Matrix<Scalar> hidden;
  SignificancePrior<Scalar> prior;  // already uniform when text priors are off
  Vector<Scalar> idf_weights;       // normalized; empty if not needed
};

template <typename Scalar>
Var<Scalar> variantLoss(Variant variant, const EncoderOutput<Scalar>& student, const TeacherTargets<Scalar>& teacher,
                        const LossOptions& opts) {
  const Var<Scalar>& speech = student.hidden;
  auto& g = speech.graph();
  auto text = g.constant(teacher.hidden);
  const Eigen::Index n_s = speech.rows(), n_t = text.rows();

  auto speech_prior_values = [&]() {
    if (!opts.speech_prior) return SignificancePrior<Scalar>::uniform(n_s);
    return asp(student.attentionStack(), opts.layer_mode);
  };

  switch (variant) {
    case Variant::GlobCls:
      return globalL1(poolGlobal(speech, PoolMode::Cls), poolGlobal(text, PoolMode::Cls));
    case Variant::GlobAvr:
      return globalL1(poolGlobal(speech, PoolMode::Avr), poolGlobal(text, PoolMode::Avr));
    case Variant::PadGlob: {
      Var<Scalar> sp = opts.speech_prior && opts.prior_gradient ? aspVar(student.attention, opts.layer_mode)
                                                                : g.constant(speech_prior_values().column());
      return padGlobal(speech, text, sp, g.constant(teacher.prior.column()));
    }
    case Variant::TLocal:
      return localMaxSim(speech, text);
    case Variant::TLocalIdf:
      require(teacher.idf_weights.size() == n_t, "tlocal_idf: missing idf weights");
      return weightedLocal(speech, text, teacher.idf_weights);
    case Variant::PadTLocal:
      return weightedLocal(speech, text, teacher.prior.weights);
    case Variant::PadSLocal:
      return spanLocal(aasa(speech, speech_prior_values(), opts.span), text, teacher.prior.weights);
    case Variant::TLocalOr:
      return ctcOrdered(cosineSimilarity(speech, text), textPositions(n_t), opts.blank_logit);
    case Variant::SLocalOr: {
      auto pools = aasa(speech, speech_prior_values(), opts.span);
      return ctcOrdered(cosineSimilarity(spansInTimeOrder(pools), text), textPositions(n_t), opts.blank_logit);
    }
  }
  throw ContractViolation("variantLoss: unknown variant");
}

template <typename Scalar>
Var<Scalar> specLoss(const LossSpec& spec, const EncoderOutput<Scalar>& student, const TeacherTargets<Scalar>& teacher,
                     const LossOptions& opts) {
  spec.validate();
  if (!spec.isJoint() && spec.components.front().second == 1.0) {
    return variantLoss(spec.components.front().first, student, teacher, opts);
  }
  std::vector<std::pair<Var<Scalar>, double>> parts;
  for (const auto& [v, w] : spec.components) parts.emplace_back(variantLoss(v, student, teacher, opts), w);
  return jointLoss(parts);
}

}  // namespace pad
