#include "debiaslab/baselines.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "debiaslab/ad/ops.hpp"
#include "debiaslab/errors.hpp"

namespace debiaslab::baselines {
namespace {

constexpr double kMinProb = 1e-12;

void validate(const BiasEnsembleInputs& in) {
    const ad::Tensor& logits = in.logits.value();
    ad::require_matrix(logits, "bias ensemble logits");
    if (in.bias_probs.shape() != logits.shape()) {
        throw DimensionError("bias probabilities " + ad::shape_to_string(in.bias_probs.shape()) +
                             " do not match logits " + ad::shape_to_string(logits.shape()));
    }
    if (in.labels.size() != logits.rows()) throw DimensionError("label count does not match logits");
    const std::size_t k = logits.cols();
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        if (in.labels[i] < 0 || static_cast<std::size_t>(in.labels[i]) >= k) {
            throw IndexError("label " + std::to_string(in.labels[i]) + " outside [0," + std::to_string(k) + ")");
        }
        double s = 0.0;
        for (double p : in.bias_probs.row(i)) s += p;
        if (std::abs(s - 1.0) > 1e-6) {
            throw ContractError("bias probabilities of row " + std::to_string(i) + " sum to " + std::to_string(s));
        }
    }
}

double gold_prob(const BiasEnsembleInputs& in, std::size_t i) {
    return in.bias_probs(i, static_cast<std::size_t>(in.labels[i]));
}

}  // namespace

ad::Var reweight_loss(const BiasEnsembleInputs& inputs) {
    validate(inputs);
    const std::size_t n = inputs.labels.size();
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) weights[i] = 1.0 - gold_prob(inputs, i);
    ad::Var nll = ad::scale(ad::pick(ad::log_softmax(inputs.logits), inputs.labels), -1.0);
    return ad::weighted_mean(nll, weights);
}

ad::Var poe_loss(const BiasEnsembleInputs& inputs, PoeDiagnostics* diagnostics) {
    validate(inputs);
    ad::Tensor log_bias = inputs.bias_probs;
    for (double& p : log_bias.values()) {
        if (p <= 0.0) {
            p = kMinProb;
            if (diagnostics != nullptr) ++diagnostics->clamped;
        }
        p = std::log(p);
    }
    ad::Var combined = ad::add_constant(ad::log_softmax(inputs.logits), log_bias);
    return ad::log_softmax_ce(combined, inputs.labels);
}

ad::Tensor scaled_teacher(const ad::Tensor& teacher_probs, const ad::Tensor& bias_probs, std::span<const int> labels) {
    if (teacher_probs.shape() != bias_probs.shape()) {
        throw DimensionError("teacher probabilities " + ad::shape_to_string(teacher_probs.shape()) +
                             " do not match bias probabilities " + ad::shape_to_string(bias_probs.shape()));
    }
    ad::Tensor out = teacher_probs;
    const std::size_t k = out.cols();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (y >= k) throw IndexError("label outside class range");
        const double exponent = 1.0 - bias_probs(i, y);
        auto row = out.row(i);
        double s = 0.0;
        for (double& p : row) {
            p = std::pow(p, exponent);
            s += p;
        }
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ContractError("scaled teacher row " + std::to_string(i) + " is degenerate");
        }
        for (double& p : row) p /= s;
    }
    return out;
}

ad::Var conf_reg_loss(const BiasEnsembleInputs& inputs, const ad::Tensor& teacher_probs) {
    validate(inputs);
    const ad::Tensor target = scaled_teacher(teacher_probs, inputs.bias_probs, inputs.labels);
    return ad::soft_cross_entropy(ad::log_softmax(inputs.logits), target);
}

}  // namespace debiaslab::baselines
