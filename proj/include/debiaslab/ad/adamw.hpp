#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "debiaslab/ad/tensor.hpp"

namespace debiaslab::ad {

struct AdamWOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// Moment buffers for one parameter list. Buffers are sized on the first step.
struct AdamWState {
    AdamWOptions options;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;

    explicit AdamWState(AdamWOptions opts = {}) : options(opts) {}
};

/// One decoupled-weight-decay Adam update:
///   p ← p·(1 − lr·wd) − lr · m̂ / (√v̂ + ε)
/// with bias-corrected moments m̂, v̂.
void adamw_step(std::span<Tensor* const> params, std::span<const std::span<const double>> grads,
                AdamWState& state);

/// Same, reading each parameter's own grad() buffer.
void adamw_step(std::span<Tensor* const> params, AdamWState& state);

}  // namespace debiaslab::ad
