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

// Toy transformer encoders: a token-embedding teacher and a frame-projection
// student sharing one layer stack design. Each layer is multi-head
// self-attention followed by a ReLU feed-forward block, both residual.
// Per-layer attention maps are averaged over heads and exposed to callers.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pad/autodiff.hpp"

namespace pad {

/// One n x n row-stochastic map per layer (row = query, column = key).
template <typename Scalar>
using AttentionStack = std::vector<Matrix<Scalar>>;

struct EncoderConfig {
  int num_layers = 2;
  int num_heads = 2;
  int model_dim = 32;
  int ffn_dim = 64;
  double init_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(num_layers >= 0, "EncoderConfig: num_layers must be >= 0");
    require(num_heads > 0, "EncoderConfig: num_heads must be positive");
    require(model_dim > 0, "EncoderConfig: model_dim must be positive");
    require(ffn_dim > 0, "EncoderConfig: ffn_dim must be positive");
    require(model_dim % num_heads == 0, "EncoderConfig: model_dim must be divisible by num_heads");
    require(init_scale > 0.0, "EncoderConfig: init_scale must be positive");
  }
};

enum class EncoderKind { Teacher, Student };

template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> query, key, value, output;
  Matrix<Scalar> ffn_in, ffn_in_bias, ffn_out, ffn_out_bias;
};

template <typename Scalar>
struct EncoderParams {
  EncoderKind kind = EncoderKind::Student;
  int num_heads = 1;
  // Teacher: vocab x d embedding table. Student: d_in x d input projection.
  Matrix<Scalar> input;
  // Student only: 1 x d.
  Matrix<Scalar> input_bias;
  std::vector<LayerParams<Scalar>> layers;

  Eigen::Index modelDim() const { return input.cols(); }

  std::vector<Matrix<Scalar>*> tensors() {
    std::vector<Matrix<Scalar>*> out{&input};
    if (kind == EncoderKind::Student) out.push_back(&input_bias);
    for (auto& l : layers) {
      for (auto* m : {&l.query, &l.key, &l.value, &l.output, &l.ffn_in, &l.ffn_in_bias, &l.ffn_out,
                      &l.ffn_out_bias}) {
        out.push_back(m);
      }
    }
    return out;
  }

  std::vector<const Matrix<Scalar>*> tensors() const {
    std::vector<const Matrix<Scalar>*> out;
    for (auto* m : const_cast<EncoderParams*>(this)->tensors()) out.push_back(m);
    return out;
  }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
std::vector<LayerParams<Scalar>> initLayers(const EncoderConfig& cfg, std::mt19937_64& rng) {
  const Eigen::Index d = cfg.model_dim, f = cfg.ffn_dim;
  const double s = cfg.init_scale;
  std::vector<LayerParams<Scalar>> layers;
  for (int l = 0; l < cfg.num_layers; ++l) {
    LayerParams<Scalar> p;
    p.query = gaussian<Scalar>(rng, d, d, s / std::sqrt(double(d)));
    p.key = gaussian<Scalar>(rng, d, d, s / std::sqrt(double(d)));
    p.value = gaussian<Scalar>(rng, d, d, s / std::sqrt(double(d)));
    // Residual branches start small so depth does not blow up activations.
    p.output = gaussian<Scalar>(rng, d, d, 0.5 / std::sqrt(double(d)));
    p.ffn_in = gaussian<Scalar>(rng, d, f, 1.0 / std::sqrt(double(d)));
    p.ffn_in_bias = Matrix<Scalar>::Zero(1, f);
    p.ffn_out = gaussian<Scalar>(rng, f, d, 0.5 / std::sqrt(double(f)));
    p.ffn_out_bias = Matrix<Scalar>::Zero(1, d);
    layers.push_back(std::move(p));
  }
  return layers;
}

}  // namespace detail

/// Teacher with a vocab x d embedding table (unit-variance entries).
template <typename Scalar>
EncoderParams<Scalar> initTeacher(const EncoderConfig& cfg, int vocab_size) {
  cfg.validate();
  require(vocab_size > 0, "initTeacher: vocab_size must be positive");
  std::mt19937_64 rng(cfg.seed);
  EncoderParams<Scalar> p;
  p.kind = EncoderKind::Teacher;
  p.num_heads = cfg.num_heads;
  p.input = detail::gaussian<Scalar>(rng, vocab_size, cfg.model_dim, 1.0);
  p.layers = detail::initLayers<Scalar>(cfg, rng);
  return p;
}

/// Student with a d_in x d input projection.
template <typename Scalar>
EncoderParams<Scalar> initStudent(const EncoderConfig& cfg, int input_dim) {
  cfg.validate();
  require(input_dim > 0, "initStudent: input_dim must be positive");
  std::mt19937_64 rng(cfg.seed);
  EncoderParams<Scalar> p;
  p.kind = EncoderKind::Student;
  p.num_heads = cfg.num_heads;
  p.input = detail::gaussian<Scalar>(rng, input_dim, cfg.model_dim, 1.0 / std::sqrt(double(input_dim)));
  p.input_bias = Matrix<Scalar>::Zero(1, cfg.model_dim);
  p.layers = detail::initLayers<Scalar>(cfg, rng);
  return p;
}

/// Parameters registered as nodes of one graph, in EncoderParams::tensors() order.
template <typename Scalar>
struct BoundParams {
  const EncoderParams<Scalar>* params = nullptr;
  std::vector<Var<Scalar>> vars;
};

template <typename Scalar>
BoundParams<Scalar> bindParameters(Graph<Scalar>& g, const EncoderParams<Scalar>& params, bool trainable) {
  BoundParams<Scalar> b;
  b.params = &params;
  for (const auto* m : params.tensors()) b.vars.push_back(g.leaf(*m, trainable));
  return b;
}

/// Gradients of bound parameters after backward(), in tensors() order.
template <typename Scalar>
std::vector<Matrix<Scalar>> parameterGrads(const BoundParams<Scalar>& b) {
  std::vector<Matrix<Scalar>> out;
  for (const auto& v : b.vars) {
    out.push_back(v.grad().size() ? v.grad() : Matrix<Scalar>::Zero(v.rows(), v.cols()));
  }
  return out;
}

template <typename Scalar>
struct EncoderOutput {
  Var<Scalar> hidden;
  std::vector<Var<Scalar>> attention;

  AttentionStack<Scalar> attentionStack() const {
    AttentionStack<Scalar> out;
    for (const auto& a : attention) out.push_back(a.value());
    return out;
  }
};

/// Encoder output detached from any graph.
template <typename Scalar>
struct EncodedSequence {
  Matrix<Scalar> hidden;
  AttentionStack<Scalar> attention;
};

namespace detail {

template <typename Scalar>
EncoderOutput<Scalar> runLayers(const BoundParams<Scalar>& b, Var<Scalar> x, std::size_t first_layer_var) {
  const auto& params = *b.params;
  const Eigen::Index d = params.modelDim();
  const int heads = params.num_heads;
  const Eigen::Index head_dim = d / heads;
  const Scalar inv_sqrt = static_cast<Scalar>(1.0 / std::sqrt(double(head_dim)));
  EncoderOutput<Scalar> out;
  std::size_t k = first_layer_var;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& wq = b.vars[k], &wk = b.vars[k + 1], &wv = b.vars[k + 2], &wo = b.vars[k + 3];
    const auto& w1 = b.vars[k + 4], &b1 = b.vars[k + 5], &w2 = b.vars[k + 6], &b2 = b.vars[k + 7];
    k += 8;
    auto q = matmul(x, wq), kx = matmul(x, wk), v = matmul(x, wv);
    std::vector<Var<Scalar>> head_out;
    Var<Scalar> attn_sum;
    for (int h = 0; h < heads; ++h) {
      auto qh = sliceCols(q, h * head_dim, head_dim);
      auto kh = sliceCols(kx, h * head_dim, head_dim);
      auto vh = sliceCols(v, h * head_dim, head_dim);
      auto attn = softmaxRows(scale(matmul(qh, transpose(kh)), inv_sqrt));
      head_out.push_back(matmul(attn, vh));
      attn_sum = h == 0 ? attn : add(attn_sum, attn);
    }
    out.attention.push_back(heads == 1 ? attn_sum : scale(attn_sum, static_cast<Scalar>(1.0 / heads)));
    auto mixed = heads == 1 ? head_out.front() : concatCols(head_out);
    x = add(x, matmul(mixed, wo));
    auto ffn = matmul(relu(addRowVector(matmul(x, w1), b1)), w2);
    x = add(x, addRowVector(ffn, b2));
  }
  out.hidden = x;
  return out;
}

}  // namespace detail

/// Teacher forward pass on token ids inside graph g.
template <typename Scalar>
EncoderOutput<Scalar> encodeTokens([[maybe_unused]] Graph<Scalar>& g, const BoundParams<Scalar>& b, std::span<const int> tokens) {
  const auto& params = *b.params;
  require(params.kind == EncoderKind::Teacher, "encodeTokens: requires teacher parameters");
  require(!tokens.empty(), "encodeTokens: empty token sequence");
  std::vector<Eigen::Index> rows;
  for (int t : tokens) {
    if (t < 0 || t >= params.input.rows()) {
      throw ContractViolation("encodeTokens: token id " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(params.input.rows()));
    }
    rows.push_back(t);
  }
  auto x = gatherRows(b.vars[0], std::move(rows));
  return detail::runLayers(b, x, 1);
}

/// Student forward pass on continuous n x d_in frames inside graph g.
template <typename Scalar>
EncoderOutput<Scalar> encodeFrames(Graph<Scalar>& g, const BoundParams<Scalar>& b, const Matrix<Scalar>& frames) {
  const auto& params = *b.params;
  require(params.kind == EncoderKind::Student, "encodeFrames: requires student parameters");
  require(frames.rows() > 0, "encodeFrames: empty frame sequence");
  require(frames.cols() == params.input.rows(), "encodeFrames: frame dimension does not match projection");
  auto x = addRowVector(matmul(g.constant(frames), b.vars[0]), b.vars[1]);
  return detail::runLayers(b, x, 2);
}

/// Frozen teacher forward pass; the result carries no graph.
template <typename Scalar>
EncodedSequence<Scalar> encodeTeacher(const EncoderParams<Scalar>& params, std::span<const int> tokens) {
  Graph<Scalar> g;
  auto bound = bindParameters(g, params, false);
  auto out = encodeTokens(g, bound, tokens);
  return {out.hidden.value(), out.attentionStack()};
}

enum class PoolMode { Cls, Avr, Prior };

/// Sequence-level pooling to a 1 x d row.
///   Cls:   row 0.
///   Avr:   arithmetic mean, computed as uniform-weight sum pooling.
///   Prior: sum_i prior_i h_i; prior must be n x 1.
template <typename Scalar>
Var<Scalar> poolGlobal(const Var<Scalar>& hidden, PoolMode mode, const Var<Scalar>* prior = nullptr) {
  require(hidden.rows() > 0, "poolGlobal: empty sequence");
  switch (mode) {
    case PoolMode::Cls:
      return gatherRows(hidden, {0});
    case PoolMode::Avr: {
      const Scalar u = static_cast<Scalar>(1.0 / double(hidden.rows()));
      auto w = hidden.graph().constant(Matrix<Scalar>::Constant(hidden.rows(), 1, u));
      return colSums(scaleRows(hidden, w));
    }
    case PoolMode::Prior:
      require(prior != nullptr, "poolGlobal: prior mode requires a prior");
      require(prior->rows() == hidden.rows() && prior->cols() == 1, "poolGlobal: prior length must equal n");
      return colSums(scaleRows(hidden, *prior));
  }
  throw ContractViolation("poolGlobal: unknown mode");
}

/// Linear map for imported embeddings whose width differs from the target space.
template <typename Scalar>
struct LinearProjection {
  Matrix<Scalar> weight;  // d_in x d_out

  static LinearProjection random(Eigen::Index d_in, Eigen::Index d_out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return {detail::gaussian<Scalar>(rng, d_in, d_out, 1.0 / std::sqrt(double(d_in)))};
  }

  Var<Scalar> apply(const Var<Scalar>& x, bool trainable = false) const {
    require(x.cols() == weight.rows(), "LinearProjection: input width mismatch");
    return matmul(x, x.graph().leaf(weight, trainable));
  }
};

/// FNV-1a over shapes and raw bytes of every parameter tensor.
template <typename Scalar>
std::uint64_t parameterDigest(const EncoderParams<Scalar>& params) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto* m : params.tensors()) {
    const std::int64_t shape[2] = {m->rows(), m->cols()};
    mix(shape, sizeof(shape));
    mix(m->data(), sizeof(Scalar) * static_cast<std::size_t>(m->size()));
  }
  return h;
}

}  // namespace pad
