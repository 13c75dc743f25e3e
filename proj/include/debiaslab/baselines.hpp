#pragma once

#include <cstddef>
#include <span>

#include "debiaslab/ad/tape.hpp"
#include "debiaslab/ad/tensor.hpp"

namespace debiaslab::baselines {

/// Main-model logits with the frozen bias-only probabilities for the same rows.
struct BiasEnsembleInputs {
    ad::Var logits;              // n × K, gradient-carrying
    const ad::Tensor& bias_probs;  // n × K, rows sum to 1
    std::span<const int> labels;
};

/// mean_i (1 − b_{i,y_i}) · CE(logits_i, y_i)
ad::Var reweight_loss(const BiasEnsembleInputs& inputs);

struct PoeDiagnostics {
    /// Bias probabilities ≤ 0 replaced by 1e-12.
    std::size_t clamped = 0;
};

/// Cross-entropy of softmax(log softmax(logits) + log b).
ad::Var poe_loss(const BiasEnsembleInputs& inputs, PoeDiagnostics* diagnostics = nullptr);

/// teacher_i^(1 − b_{i,y_i}), renormalized per row.
ad::Tensor scaled_teacher(const ad::Tensor& teacher_probs, const ad::Tensor& bias_probs, std::span<const int> labels);

/// Cross-entropy between the student's log-probabilities and scaled_teacher().
ad::Var conf_reg_loss(const BiasEnsembleInputs& inputs, const ad::Tensor& teacher_probs);

}  // namespace debiaslab::baselines
