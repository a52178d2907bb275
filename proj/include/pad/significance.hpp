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

#pragma once

#include <cmath>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "pad/autodiff.hpp"
#include "pad/encoder.hpp"

namespace pad {

/// Nonnegative per-position weights summing to 1.
template <typename Scalar>
struct SignificancePrior {
  Vector<Scalar> weights;

  Eigen::Index size() const { return weights.size(); }
  Matrix<Scalar> column() const { return weights; }

  static SignificancePrior uniform(Eigen::Index n) {
    require(n > 0, "SignificancePrior::uniform: n must be positive");
    return {Vector<Scalar>::Constant(n, static_cast<Scalar>(1.0 / double(n)))};
  }
};

enum class LayerMode { All, Last };

/// Attention-based significance prior.
///
/// For each selected layer l, position j scores the attention it receives,
/// colsum_j(A^l), normalized by the total mass of A^l; scores are averaged
/// over the selected layers (all of them, or only the last).
template <typename Scalar>
SignificancePrior<Scalar> asp(const AttentionStack<Scalar>& stack, LayerMode mode = LayerMode::All) {
  require(!stack.empty(), "asp: empty attention stack");
  const Eigen::Index n = stack.front().rows();
  require(n > 0, "asp: empty attention map");
  const std::size_t first = mode == LayerMode::Last ? stack.size() - 1 : 0;
  Vector<double> acc = Vector<double>::Zero(n);
  for (std::size_t l = first; l < stack.size(); ++l) {
    const auto& a = stack[l];
    require(a.rows() == n && a.cols() == n, "asp: attention maps must all be n x n");
    Matrix<double> ad = a.template cast<double>();
    const double total = ad.sum();
    require(total > 0.0, "asp: attention map has no mass");
    acc += ad.colwise().sum().transpose() / total;
  }
  acc /= static_cast<double>(stack.size() - first);
  return {acc.template cast<Scalar>()};
}

/// Differentiable variant of asp() over attention maps living in a graph;
/// returns an n x 1 column.
template <typename Scalar>
Var<Scalar> aspVar(const std::vector<Var<Scalar>>& stack, LayerMode mode = LayerMode::All) {
  require(!stack.empty(), "aspVar: empty attention stack");
  const std::size_t first = mode == LayerMode::Last ? stack.size() - 1 : 0;
  Var<Scalar> acc;
  for (std::size_t l = first; l < stack.size(); ++l) {
    const auto& a = stack[l];
    require(a.rows() == a.cols() && a.rows() == stack.front().rows(), "aspVar: maps must all be n x n");
    // Row sums of a row-stochastic map are 1, so the total mass is a constant n
    // and does not contribute a gradient path.
    const double total = a.value().template cast<double>().sum();
    auto term = scale(transpose(colSums(a)), static_cast<Scalar>(1.0 / total));
    acc = l == first ? term : add(acc, term);
  }
  const auto layers = static_cast<double>(stack.size() - first);
  return layers == 1.0 ? acc : scale(acc, static_cast<Scalar>(1.0 / layers));
}

/// Row i of seq scaled by weight i.
template <typename Scalar>
Var<Scalar> applyPrior(const Var<Scalar>& seq, const Var<Scalar>& prior_column) {
  require(prior_column.rows() == seq.rows() && prior_column.cols() == 1, "applyPrior: prior length must equal n");
  return scaleRows(seq, prior_column);
}

template <typename Scalar>
Var<Scalar> applyPrior(const Var<Scalar>& seq, const SignificancePrior<Scalar>& prior) {
  require(prior.size() == seq.rows(), "applyPrior: prior length must equal n");
  return scaleRows(seq, seq.graph().constant(prior.column()));
}

/// Smoothed inverse document frequency over a corpus of token sequences:
/// idf(t) = ln((1 + N) / (1 + df(t))) + 1. Unseen tokens get the df = 0 value,
/// which is the largest attainable.
class IdfTable {
 public:
  IdfTable() = default;

  template <typename Corpus>
  static IdfTable fit(const Corpus& documents) {
    IdfTable table;
    for (const auto& doc : documents) {
      ++table.documents_;
      std::set<int> seen(std::begin(doc), std::end(doc));
      for (int t : seen) ++table.df_[t];
    }
    return table;
  }

  std::size_t documentCount() const { return documents_; }

  double idf(int token) const {
    auto it = df_.find(token);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + double(documents_)) / (1.0 + df)) + 1.0;
  }

  double maxIdf() const { return std::log(1.0 + double(documents_)) + 1.0; }

  Vector<double> weights(std::span<const int> tokens, bool normalize) const {
    require(!tokens.empty(), "IdfTable::weights: empty token sequence");
    Vector<double> w(static_cast<Eigen::Index>(tokens.size()));
    for (std::size_t i = 0; i < tokens.size(); ++i) w(static_cast<Eigen::Index>(i)) = idf(tokens[i]);
    if (normalize) w /= w.sum();
    return w;
  }

 private:
  std::size_t documents_ = 0;
  std::map<int, std::size_t> df_;
};

}  // namespace pad
