#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "salsa/tensor.h"

namespace salsa {

// Differentiable primitives. Unless noted, tensors are row-major and 2-D
// operands are [rows, cols].
//
// Broadcasting is deliberately narrow: a binary op accepts equal shapes, a
// right operand whose shape is a trailing suffix of the left shape (bias
// add over rows), or a single-element right operand. Everything else is a
// DimensionError.

enum class UnaryOp { Exp, Log, Tanh, Sigmoid, Relu, Neg, Softplus };
enum class BinaryOp { Add, Sub, Mul, Div };

Tensor elementwise(UnaryOp op, const Tensor& x);
Tensor elementwise(BinaryOp op, const Tensor& x, const Tensor& y);

inline Tensor add(const Tensor& x, const Tensor& y) {
  return elementwise(BinaryOp::Add, x, y);
}
inline Tensor sub(const Tensor& x, const Tensor& y) {
  return elementwise(BinaryOp::Sub, x, y);
}
inline Tensor mul(const Tensor& x, const Tensor& y) {
  return elementwise(BinaryOp::Mul, x, y);
}
inline Tensor div(const Tensor& x, const Tensor& y) {
  return elementwise(BinaryOp::Div, x, y);
}
inline Tensor exp(const Tensor& x) {
  return elementwise(UnaryOp::Exp, x);
}
inline Tensor log(const Tensor& x) {
  return elementwise(UnaryOp::Log, x);
}
inline Tensor tanh(const Tensor& x) {
  return elementwise(UnaryOp::Tanh, x);
}
inline Tensor sigmoid(const Tensor& x) {
  return elementwise(UnaryOp::Sigmoid, x);
}
inline Tensor relu(const Tensor& x) {
  return elementwise(UnaryOp::Relu, x);
}
inline Tensor neg(const Tensor& x) {
  return elementwise(UnaryOp::Neg, x);
}
/// log(1 + exp(x)), evaluated stably.
inline Tensor softplus(const Tensor& x) {
  return elementwise(UnaryOp::Softplus, x);
}

/// x * factor for a constant factor.
Tensor scale(const Tensor& x, double factor);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor softmax(const Tensor& x, std::size_t axis);

enum class ReduceOp { Sum, Mean, Max };

/// Reduces one axis away. Max routes the gradient to the first maximal entry.
Tensor reduce(ReduceOp op, const Tensor& x, std::size_t axis);
/// Reduces all entries to a [1] tensor.
Tensor reduceAll(ReduceOp op, const Tensor& x);

inline Tensor sum(const Tensor& x) {
  return reduceAll(ReduceOp::Sum, x);
}
inline Tensor mean(const Tensor& x) {
  return reduceAll(ReduceOp::Mean, x);
}

/// Rows of a [V, d] table selected by ids, giving [ids.size(), d].
Tensor gather(const Tensor& table, std::span<const int> ids);

Tensor reshape(const Tensor& x, Shape shape);
/// Columns [start, start + count) of a 2-D tensor.
Tensor sliceCols(const Tensor& x, std::size_t start, std::size_t count);
/// Stacks 2-D tensors with equal column counts.
Tensor concatRows(const std::vector<Tensor>& parts);

/// [B, d] -> [B * times, d]; row b * times + t is row b of the input.
Tensor repeatRows(const Tensor& x, std::size_t times);
/// [B * group, d] -> [B, d]; out[b] = sum_t weights[b * group + t] * x[b * group + t].
/// Rows with zero weight are skipped entirely.
Tensor poolRows(
    const Tensor& x,
    std::size_t group,
    std::span<const double> weights);

/// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

/// Per-row standardisation over the last axis followed by gain and bias.
Tensor layerNorm(
    const Tensor& x,
    const Tensor& gain,
    const Tensor& bias,
    double eps);

/// Each row divided by its L2 norm. Zero rows raise DomainError.
Tensor l2NormalizeRows(const Tensor& x);

struct AttentionSpec {
  std::size_t batch = 1;
  std::size_t heads = 1;
  bool causal = false;
  /// Empty, or batch * Tk flags; false marks a key that may not be attended.
  std::span<const std::uint8_t> keyValid;
  /// Empty, or batch * Tq * Tk flags; false forbids query i from key j.
  std::span<const std::uint8_t> allowed;
  double dropout = 0.0;
  Rng* rng = nullptr;
  bool training = false;
};

/// Multi-head scaled dot-product attention on pre-projected inputs.
/// q: [batch * Tq, d], k and v: [batch * Tk, d]; heads split d evenly and the
/// result is the concatenated per-head context [batch * Tq, d]. Dropout, when
/// training, applies to the attention weights.
Tensor attention(
    const Tensor& q,
    const Tensor& k,
    const Tensor& v,
    const AttentionSpec& spec);

/// Sum over rows of weights[i] * -log softmax(logits[i])[targets[i]].
/// Rows with zero weight are ignored (their targets are not checked).
Tensor softmaxCrossEntropy(
    const Tensor& logits,
    std::span<const int> targets,
    std::span<const double> weights);

} // namespace salsa
