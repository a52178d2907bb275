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

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Graph owns every node created while evaluating an expression. Nodes are
// appended in evaluation order, so the node vector is already a topological
// order and backward() is a single reverse sweep. Vectors are represented as
// 1 x d (rows) or n x 1 (columns) matrices; there is no implicit broadcasting.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pad/errors.hpp"

namespace pad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using NodeId = std::size_t;

template <typename Scalar>
class Graph;

/// Lightweight handle to a node of a Graph. Copying a Var copies the handle.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, NodeId id) : graph_(graph), id_(id) {}

  const Matrix<Scalar>& value() const { return graph_->value(id_); }
  const Matrix<Scalar>& grad() const { return graph_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  bool requiresGrad() const { return graph_->requiresGrad(id_); }

  Scalar item() const {
    require(size() == 1, "item() requires a 1x1 tensor");
    return value()(0, 0);
  }

  Graph<Scalar>& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<Scalar>* graph_ = nullptr;
  NodeId id_ = 0;
};

template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Graph&, NodeId)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<Scalar> leaf(Mat value, bool requires_grad = true) {
    if (!value.allFinite()) throw NumericError("leaf tensor contains non-finite values");
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  Var<Scalar> constant(Mat value) { return leaf(std::move(value), false); }

  /// Appends an op result. `backward` is invoked during the reverse sweep only
  /// when the result needs a gradient; it reads grad(self) and accumulates into
  /// the inputs it captured.
  Var<Scalar> record(std::string_view op, Mat value, std::initializer_list<Var<Scalar>> inputs,
                     BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var<Scalar>>(inputs.begin(), inputs.size()),
                  std::move(backward));
  }

  Var<Scalar> record(std::string_view op, Mat value, std::span<const Var<Scalar>> inputs,
                     BackwardFn backward) {
    if (!value.allFinite()) {
      throw NumericError(std::string(op) + " produced non-finite values");
    }
    bool needs_grad = false;
    for (const auto& in : inputs) {
      require(in.valid() && &in.graph() == this, std::string(op) + ": input from another graph");
      needs_grad = needs_grad || nodes_[in.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Mat(), needs_grad,
                          needs_grad ? std::move(backward) : BackwardFn()});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  /// Reverse sweep from a scalar loss. A graph can be differentiated once.
  void backward(const Var<Scalar>& loss) {
    require(loss.valid() && &loss.graph() == this, "backward: loss belongs to another graph");
    require(loss.size() == 1, "backward: loss must be a scalar (1x1) tensor");
    require(!consumed_, "backward: graph already consumed");
    consumed_ = true;
    for (auto& node : nodes_) {
      if (node.requires_grad) node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    }
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad(0, 0) = Scalar(1);
    for (NodeId id = loss.id() + 1; id-- > 0;) {
      auto& node = nodes_[id];
      if (node.requires_grad && node.backward) node.backward(*this, id);
    }
  }

  const Mat& value(NodeId id) const { return nodes_[id].value; }

  /// Gradient of the last backward() target; an empty matrix for nodes that do
  /// not require gradients or before backward() ran.
  const Mat& grad(NodeId id) const { return nodes_[id].grad; }

  bool requiresGrad(NodeId id) const { return nodes_[id].requires_grad; }

  template <typename Derived>
  void accumulate(NodeId id, const Eigen::MatrixBase<Derived>& delta) {
    auto& node = nodes_[id];
    if (!node.requires_grad) return;
    node.grad += delta;
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace detail {

template <typename Scalar>
void requireSameShape(const Var<Scalar>& a, const Var<Scalar>& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
  }
}

template <typename Scalar>
void requireSameGraph(const Var<Scalar>& a, const Var<Scalar>& b, std::string_view op) {
  require(&a.graph() == &b.graph(), std::string(op) + ": operands from different graphs");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::requireSameGraph(a, b, "add");
  detail::requireSameShape(a, b, "add");
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record("add", a.value() + b.value(), {a, b}, [ia, ib](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ib, g.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::requireSameGraph(a, b, "sub");
  detail::requireSameShape(a, b, "sub");
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record("sub", a.value() - b.value(), {a, b}, [ia, ib](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self));
    g.accumulate(ib, -g.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> cwiseProduct(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::requireSameGraph(a, b, "cwiseProduct");
  detail::requireSameShape(a, b, "cwiseProduct");
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record("cwiseProduct", a.value().cwiseProduct(b.value()), {a, b},
                          [ia, ib](Graph<Scalar>& g, NodeId self) {
                            g.accumulate(ia, g.grad(self).cwiseProduct(g.value(ib)));
                            g.accumulate(ib, g.grad(self).cwiseProduct(g.value(ia)));
                          });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar factor) {
  const NodeId ia = a.id();
  return a.graph().record("scale", a.value() * factor, {a}, [ia, factor](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self) * factor);
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  return a.graph().record("exp", a.value().array().exp().matrix(), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self).cwiseProduct(g.value(self)));
  });
}

template <typename Scalar>
Var<Scalar> log(const Var<Scalar>& a) {
  if (!(a.value().array() > Scalar(0)).all()) throw NumericError("log: input must be strictly positive");
  const NodeId ia = a.id();
  return a.graph().record("log", a.value().array().log().matrix(), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self).cwiseQuotient(g.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  return a.graph().record("relu", a.value().cwiseMax(Scalar(0)), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const auto& x = g.value(ia);
    g.accumulate(ia, (x.array() > Scalar(0)).select(g.grad(self), Scalar(0)).matrix());
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and layout

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::requireSameGraph(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ContractViolation("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + ")");
  }
  const NodeId ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.graph().record("matmul", std::move(out), {a, b}, [ia, ib](Graph<Scalar>& g, NodeId self) {
    if (g.requiresGrad(ia)) g.accumulate(ia, g.grad(self) * g.value(ib).transpose());
    if (g.requiresGrad(ib)) g.accumulate(ib, g.value(ia).transpose() * g.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return a.graph().record("transpose", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self).transpose());
  });
}

/// out(i, :) = a(i, :) + row(0, :)
template <typename Scalar>
Var<Scalar> addRowVector(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::requireSameGraph(a, row, "addRowVector");
  require(row.rows() == 1 && row.cols() == a.cols(), "addRowVector: expected a 1 x cols row");
  const NodeId ia = a.id(), ir = row.id();
  Matrix<Scalar> out = a.value().rowwise() + row.value().row(0);
  return a.graph().record("addRowVector", std::move(out), {a, row}, [ia, ir](Graph<Scalar>& g, NodeId self) {
    g.accumulate(ia, g.grad(self));
    if (g.requiresGrad(ir)) {
      g.accumulate(ir, g.grad(self).template cast<double>().colwise().sum().template cast<Scalar>());
    }
  });
}

/// out(i, :) = weights(i) * a(i, :), weights is n x 1.
template <typename Scalar>
Var<Scalar> scaleRows(const Var<Scalar>& a, const Var<Scalar>& weights) {
  detail::requireSameGraph(a, weights, "scaleRows");
  require(weights.cols() == 1 && weights.rows() == a.rows(),
          "scaleRows: weights must be n x 1 with n = rows of the sequence");
  const NodeId ia = a.id(), iw = weights.id();
  Matrix<Scalar> out = weights.value().col(0).asDiagonal() * a.value();
  return a.graph().record("scaleRows", std::move(out), {a, weights}, [ia, iw](Graph<Scalar>& g, NodeId self) {
    const auto& gout = g.grad(self);
    g.accumulate(ia, g.value(iw).col(0).asDiagonal() * gout);
    if (g.requiresGrad(iw)) {
      Matrix<Scalar> dw = (gout.template cast<double>().cwiseProduct(g.value(ia).template cast<double>()))
                              .rowwise()
                              .sum()
                              .template cast<Scalar>();
      g.accumulate(iw, dw);
    }
  });
}

template <typename Scalar>
Var<Scalar> sliceCols(const Var<Scalar>& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count > 0 && start + count <= a.cols(), "sliceCols: range out of bounds");
  const NodeId ia = a.id();
  Matrix<Scalar> out = a.value().middleCols(start, count);
  return a.graph().record("sliceCols", std::move(out), {a}, [ia, start, count](Graph<Scalar>& g, NodeId self) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(g.value(ia).rows(), g.value(ia).cols());
    full.middleCols(start, count) = g.grad(self);
    g.accumulate(ia, full);
  });
}

/// Selects rows by index (repetition allowed); gradients scatter-add back.
template <typename Scalar>
Var<Scalar> gatherRows(const Var<Scalar>& a, std::vector<Eigen::Index> rows) {
  require(!rows.empty(), "gatherRows: empty index list");
  for (auto r : rows) require(r >= 0 && r < a.rows(), "gatherRows: row index out of range");
  const NodeId ia = a.id();
  Matrix<Scalar> out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
  return a.graph().record("gatherRows", std::move(out), {a},
                          [ia, rows = std::move(rows)](Graph<Scalar>& g, NodeId self) {
                            Matrix<Scalar> full = Matrix<Scalar>::Zero(g.value(ia).rows(), g.value(ia).cols());
                            const auto& gout = g.grad(self);
                            for (std::size_t i = 0; i < rows.size(); ++i) {
                              full.row(rows[i]) += gout.row(static_cast<Eigen::Index>(i));
                            }
                            g.accumulate(ia, full);
                          });
}

template <typename Scalar>
Var<Scalar> concatCols(const std::vector<Var<Scalar>>& parts) {
  require(!parts.empty(), "concatCols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::requireSameGraph(parts.front(), p, "concatCols");
    require(p.rows() == rows, "concatCols: row counts differ");
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  std::vector<std::pair<NodeId, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    layout.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts.front().graph().record(
      "concatCols", std::move(out), std::span<const Var<Scalar>>(parts),
      [layout = std::move(layout)](Graph<Scalar>& g, NodeId self) {
        for (const auto& [id, off] : layout) {
          if (g.requiresGrad(id)) g.accumulate(id, g.grad(self).middleCols(off, g.value(id).cols()));
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions. Sums accumulate in double regardless of Scalar.

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(a.value().template cast<double>().sum());
  return a.graph().record("sum", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const Scalar gs = g.grad(self)(0, 0);
    g.accumulate(ia, Matrix<Scalar>::Constant(g.value(ia).rows(), g.value(ia).cols(), gs));
  });
}

/// Sum over rows: n x m -> 1 x m (sum pooling over the sequence axis).
template <typename Scalar>
Var<Scalar> colSums(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  Matrix<Scalar> out = a.value().template cast<double>().colwise().sum().template cast<Scalar>();
  return a.graph().record("colSums", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    Matrix<Scalar> spread = g.grad(self).replicate(g.value(ia).rows(), 1);
    g.accumulate(ia, spread);
  });
}

/// Mean over rows: n x m -> 1 x m.
template <typename Scalar>
Var<Scalar> colMeans(const Var<Scalar>& a) {
  require(a.rows() > 0, "colMeans: empty input");
  const NodeId ia = a.id();
  const double n = static_cast<double>(a.rows());
  Matrix<Scalar> out = (a.value().template cast<double>().colwise().sum() / n).template cast<Scalar>();
  return a.graph().record("colMeans", std::move(out), {a}, [ia, n](Graph<Scalar>& g, NodeId self) {
    Matrix<Scalar> spread = (g.grad(self) / static_cast<Scalar>(n)).replicate(g.value(ia).rows(), 1);
    g.accumulate(ia, spread);
  });
}

/// Sum over columns: n x m -> n x 1.
template <typename Scalar>
Var<Scalar> rowSums(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  Matrix<Scalar> out = a.value().template cast<double>().rowwise().sum().template cast<Scalar>();
  return a.graph().record("rowSums", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    Matrix<Scalar> spread = g.grad(self).replicate(1, g.value(ia).cols());
    g.accumulate(ia, spread);
  });
}

/// Max over rows for each column: n x m -> 1 x m. Ties go to the lowest row
/// index; the backward pass routes each column's gradient to that row only.
template <typename Scalar>
Var<Scalar> colMax(const Var<Scalar>& a) {
  require(a.rows() > 0, "colMax: empty input");
  const auto& x = a.value();
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(x.cols()), 0);
  Matrix<Scalar> out(1, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < x.rows(); ++i) {
      if (x(i, j) > x(best, j)) best = i;
    }
    argmax[static_cast<std::size_t>(j)] = best;
    out(0, j) = x(best, j);
  }
  const NodeId ia = a.id();
  return a.graph().record("colMax", std::move(out), {a},
                          [ia, argmax = std::move(argmax)](Graph<Scalar>& g, NodeId self) {
                            Matrix<Scalar> routed = Matrix<Scalar>::Zero(g.value(ia).rows(), g.value(ia).cols());
                            const auto& gout = g.grad(self);
                            for (std::size_t j = 0; j < argmax.size(); ++j) {
                              const auto col = static_cast<Eigen::Index>(j);
                              routed(argmax[j], col) = gout(0, col);
                            }
                            g.accumulate(ia, routed);
                          });
}

/// Max over columns for each row: n x m -> n x 1.
template <typename Scalar>
Var<Scalar> rowMax(const Var<Scalar>& a) {
  return transpose(colMax(transpose(a)));
}

/// sum_k |a_k| as a 1x1 tensor. The subgradient at 0 is 0.
template <typename Scalar>
Var<Scalar> l1Norm(const Var<Scalar>& a) {
  const NodeId ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = static_cast<Scalar>(a.value().template cast<double>().cwiseAbs().sum());
  return a.graph().record("l1Norm", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const Scalar gs = g.grad(self)(0, 0);
    Matrix<Scalar> sign = g.value(ia).unaryExpr([](Scalar v) {
      return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0));
    });
    g.accumulate(ia, sign * gs);
  });
}

// ---------------------------------------------------------------------------
// Normalizations along the last axis

/// Row-wise softmax: each row of the result sums to 1.
template <typename Scalar>
Var<Scalar> softmaxRows(const Var<Scalar>& a) {
  require(a.cols() >= 1, "softmaxRows: axis length must be >= 1");
  const auto& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    auto e = (x.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  const NodeId ia = a.id();
  return a.graph().record("softmaxRows", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const auto& y = g.value(self);
    const auto& gout = g.grad(self);
    Vector<Scalar> dots = gout.cwiseProduct(y).rowwise().sum();
    Matrix<Scalar> dx = y.cwiseProduct(gout - dots.replicate(1, y.cols()));
    g.accumulate(ia, dx);
  });
}

/// Row-wise log-sum-exp: n x m -> n x 1.
template <typename Scalar>
Var<Scalar> logSumExpRows(const Var<Scalar>& a) {
  require(a.cols() >= 1, "logSumExpRows: axis length must be >= 1");
  const auto& x = a.value();
  Matrix<Scalar> out(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = static_cast<double>(x.row(i).maxCoeff());
    const double s = (x.row(i).template cast<double>().array() - m).exp().sum();
    out(i, 0) = static_cast<Scalar>(m + std::log(s));
  }
  const NodeId ia = a.id();
  return a.graph().record("logSumExpRows", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const auto& xin = g.value(ia);
    const auto& lse = g.value(self);
    Matrix<Scalar> soft = (xin - lse.replicate(1, xin.cols())).array().exp().matrix();
    g.accumulate(ia, soft.cwiseProduct(g.grad(self).replicate(1, xin.cols())));
  });
}

/// Row-wise log-softmax, x_ij - logsumexp_j(x_i.).
template <typename Scalar>
Var<Scalar> logSoftmaxRows(const Var<Scalar>& a) {
  require(a.cols() >= 1, "logSoftmaxRows: axis length must be >= 1");
  const auto& x = a.value();
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = static_cast<double>(x.row(i).maxCoeff());
    const double lse = m + std::log((x.row(i).template cast<double>().array() - m).exp().sum());
    out.row(i) = (x.row(i).template cast<double>().array() - lse).matrix().template cast<Scalar>();
  }
  const NodeId ia = a.id();
  return a.graph().record("logSoftmaxRows", std::move(out), {a}, [ia](Graph<Scalar>& g, NodeId self) {
    const auto& y = g.value(self);
    const auto& gout = g.grad(self);
    Vector<Scalar> totals = gout.template cast<double>().rowwise().sum().template cast<Scalar>();
    Matrix<Scalar> dx = gout - y.array().exp().matrix().cwiseProduct(totals.replicate(1, y.cols()));
    g.accumulate(ia, dx);
  });
}

// ---------------------------------------------------------------------------
// Similarity

/// Pairwise cosine similarity between the rows of a (n x d) and b (m x d),
/// producing n x m. Rows with zero norm are rejected.
template <typename Scalar>
Var<Scalar> cosineSimilarity(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::requireSameGraph(a, b, "cosineSimilarity");
  require(a.cols() == b.cols(), "cosineSimilarity: feature dimensions differ");
  require(a.rows() > 0 && b.rows() > 0, "cosineSimilarity: empty input");
  Vector<Scalar> na = a.value().rowwise().norm();
  Vector<Scalar> nb = b.value().rowwise().norm();
  if ((na.array() <= Scalar(0)).any() || (nb.array() <= Scalar(0)).any()) {
    throw NumericError("cosineSimilarity: zero-norm row");
  }
  Matrix<Scalar> ahat = na.cwiseInverse().asDiagonal() * a.value();
  Matrix<Scalar> bhat = nb.cwiseInverse().asDiagonal() * b.value();
  Matrix<Scalar> out = ahat * bhat.transpose();
  const NodeId ia = a.id(), ib = b.id();
  return a.graph().record(
      "cosineSimilarity", std::move(out), {a, b},
      [ia, ib, ahat = std::move(ahat), bhat = std::move(bhat), na = std::move(na), nb = std::move(nb)](
          Graph<Scalar>& g, NodeId self) {
        const auto& gout = g.grad(self);
        if (g.requiresGrad(ia)) {
          Matrix<Scalar> dhat = gout * bhat;
          Vector<Scalar> radial = dhat.cwiseProduct(ahat).rowwise().sum();
          Matrix<Scalar> da = na.cwiseInverse().asDiagonal() * (dhat - radial.asDiagonal() * ahat);
          g.accumulate(ia, da);
        }
        if (g.requiresGrad(ib)) {
          Matrix<Scalar> dhat = gout.transpose() * ahat;
          Vector<Scalar> radial = dhat.cwiseProduct(bhat).rowwise().sum();
          Matrix<Scalar> db = nb.cwiseInverse().asDiagonal() * (dhat - radial.asDiagonal() * bhat);
          g.accumulate(ib, db);
        }
      });
}

}  // namespace pad
