#pragma once

#include <cstddef>
#include <span>

#include "debiaslab/ad/tape.hpp"

namespace debiaslab::ad {

// Differentiable primitives. Every op records itself on the tape of its first
// operand; operands must share a tape.

Var matmul(Var a, Var b);
/// x[n×m] + bias[1×m] broadcast over rows.
Var add_row_bias(Var x, Var bias);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a + c where c is a gradient-free tensor of the same shape.
Var add_constant(Var a, const Tensor& c);
Var tanh(Var a);
/// Rows of a matrix, in the given order.
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var sum(Var a);
Var mean(Var a);

/// Row-wise division by the Euclidean norm. Rows with norm below 1e-12 raise
/// DegenerateError.
Var l2_normalize(Var v);

/// Row-wise log-softmax, max-subtracted.
Var log_softmax(Var logits);

/// [n×K] → [n×1] entries logp(i, labels[i]). Labels outside [0,K) raise IndexError.
Var pick(Var logp, std::span<const int> labels);

/// Mean over rows of -log softmax(logits)[label].
Var log_softmax_ce(Var logits, std::span<const int> labels);

/// Σ_i w_i · x_i / n for a column x[n×1]; weights are gradient-free.
Var weighted_mean(Var column, std::span<const double> weights);

/// -mean_i Σ_c target(i,c) · logp(i,c); target is gradient-free.
Var soft_cross_entropy(Var logp, const Tensor& target);

/// Tape-free helpers used by inference paths.
Tensor softmax_rows(const Tensor& logits);
void l2_normalize_rows_inplace(Tensor& t);

}  // namespace debiaslab::ad
