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

// Anchor-based adaptive span aggregation.
//
// Anchors are frames admitted in descending order of significance, subject to
// a minimum spacing of more than xi/2 frames from every earlier anchor. Around
// each anchor the sequence is pooled over c windows of half-width
// xi/2, xi, 2xi, 4xi, ... clamped to the sequence bounds.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <utility>
#include <vector>

#include "pad/autodiff.hpp"
#include "pad/significance.hpp"

namespace pad {

enum class SpanPooling { Mean, Max };
enum class AnchorMode { Prior, EvenStride };

struct SpanConfig {
  int base_scale = 8;  // xi
  int num_scales = 3;  // c
  SpanPooling pooling = SpanPooling::Mean;
  AnchorMode anchor_mode = AnchorMode::Prior;
  bool multi_scale = true;

  void validate() const {
    require(base_scale >= 2 && base_scale % 2 == 0, "SpanConfig: base_scale must be even and >= 2");
    require(num_scales >= 1, "SpanConfig: num_scales must be >= 1");
  }

  /// Window half-widths actually used; a single xi/2 when multi_scale is off.
  std::vector<int> halfWidths() const {
    validate();
    std::vector<int> out{base_scale / 2};
    if (!multi_scale) return out;
    for (int w = base_scale; static_cast<int>(out.size()) < num_scales; w *= 2) out.push_back(w);
    return out;
  }
};

/// Anchor indices in admission order.
template <typename Scalar>
std::vector<int> selectAnchors(const SignificancePrior<Scalar>& prior, const SpanConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(prior.size());
  require(n > 0, "selectAnchors: empty input");
  std::vector<int> anchors;
  if (cfg.anchor_mode == AnchorMode::EvenStride) {
    for (int i = 0; i < n; i += cfg.base_scale) anchors.push_back(i);
    return anchors;
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&prior](int a, int b) { return prior.weights(a) > prior.weights(b); });
  const int min_gap = cfg.base_scale / 2;
  for (int id : order) {
    const bool spaced = std::all_of(anchors.begin(), anchors.end(),
                                    [id, min_gap](int a) { return std::abs(id - a) > min_gap; });
    if (spaced) anchors.push_back(id);
  }
  return anchors;
}

/// Max over the rows of each window, per column; ties go to the lowest row.
/// windows holds inclusive [lo, hi] row ranges. Output: windows.size() x d.
template <typename Scalar>
Var<Scalar> windowMaxPool(const Var<Scalar>& x, std::vector<std::pair<Eigen::Index, Eigen::Index>> windows) {
  const auto& v = x.value();
  Matrix<Scalar> out(static_cast<Eigen::Index>(windows.size()), v.cols());
  std::vector<Eigen::Index> argmax(windows.size() * static_cast<std::size_t>(v.cols()));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto [lo, hi] = windows[w];
    require(lo >= 0 && lo <= hi && hi < v.rows(), "windowMaxPool: window out of range");
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      Eigen::Index best = lo;
      for (Eigen::Index i = lo + 1; i <= hi; ++i) {
        if (v(i, j) > v(best, j)) best = i;
      }
      argmax[w * static_cast<std::size_t>(v.cols()) + static_cast<std::size_t>(j)] = best;
      out(static_cast<Eigen::Index>(w), j) = v(best, j);
    }
  }
  const NodeId ix = x.id();
  return x.graph().record("windowMaxPool", std::move(out), {x},
                          [ix, argmax = std::move(argmax)](Graph<Scalar>& g, NodeId self) {
                            const auto& gout = g.grad(self);
                            Matrix<Scalar> routed = Matrix<Scalar>::Zero(g.value(ix).rows(), g.value(ix).cols());
                            const Eigen::Index d = gout.cols();
                            for (Eigen::Index w = 0; w < gout.rows(); ++w) {
                              for (Eigen::Index j = 0; j < d; ++j) {
                                routed(argmax[static_cast<std::size_t>(w * d + j)], j) += gout(w, j);
                              }
                            }
                            g.accumulate(ix, routed);
                          });
}

template <typename Scalar>
struct SpanPoolSet {
  std::vector<int> anchors;      // admission order
  std::vector<int> half_widths;  // one per scale
  Var<Scalar> spans;             // (k * c) x d; row m * c + q is anchor m at scale q

  std::size_t anchorCount() const { return anchors.size(); }
  std::size_t scaleCount() const { return half_widths.size(); }

  /// Window [lo, hi] of anchor m at scale q.
  std::pair<int, int> window(std::size_t m, std::size_t q, int n) const {
    const int id = anchors[m], s = half_widths[q];
    return {std::max(0, id - s), std::min(n - 1, id + s)};
  }
};

template <typename Scalar>
SpanPoolSet<Scalar> aasa(const Var<Scalar>& seq, const SignificancePrior<Scalar>& prior, const SpanConfig& cfg) {
  require(seq.rows() > 0, "aasa: empty sequence");
  require(prior.size() == seq.rows(), "aasa: prior length must equal sequence length");
  SpanPoolSet<Scalar> out;
  out.anchors = selectAnchors(prior, cfg);
  out.half_widths = cfg.halfWidths();
  const int n = static_cast<int>(seq.rows());
  const std::size_t k = out.anchors.size(), c = out.half_widths.size();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> windows;
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t q = 0; q < c; ++q) windows.push_back(out.window(m, q, n));
  }
  if (cfg.pooling == SpanPooling::Max) {
    out.spans = windowMaxPool(seq, std::move(windows));
    return out;
  }
  Matrix<Scalar> pool = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(windows.size()), n);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto [lo, hi] = windows[w];
    pool.row(static_cast<Eigen::Index>(w)).segment(lo, hi - lo + 1).setConstant(
        static_cast<Scalar>(1.0 / double(hi - lo + 1)));
  }
  out.spans = matmul(seq.graph().constant(std::move(pool)), seq);
  return out;
}

}  // namespace pad
