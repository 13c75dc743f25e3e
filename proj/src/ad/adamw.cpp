#include "debiaslab/ad/adamw.hpp"

#include <cmath>
#include <string>

#include "debiaslab/errors.hpp"

namespace debiaslab::ad {

void adamw_step(std::span<Tensor* const> params, std::span<const std::span<const double>> grads,
                AdamWState& state) {
    if (params.size() != grads.size()) {
        throw DimensionError("adamw_step: " + std::to_string(params.size()) + " params but " +
                             std::to_string(grads.size()) + " gradients");
    }
    if (state.step == 0) {
        state.first_moment.clear();
        state.second_moment.clear();
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->numel(), 0.0);
            state.second_moment.emplace_back(p->numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw DimensionError("adamw_step: state tracks " + std::to_string(state.first_moment.size()) +
                             " params, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i]->numel() || state.first_moment[i].size() != params[i]->numel()) {
            throw DimensionError("adamw_step: param " + std::to_string(i) + " has shape " +
                                 shape_to_string(params[i]->shape()) + " but gradient has " +
                                 std::to_string(grads[i].size()) + " entries");
        }
    }

    const AdamWOptions& o = state.options;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(o.beta1, t);
    const double bc2 = 1.0 - std::pow(o.beta2, t);
    const double decay = 1.0 - o.learning_rate * o.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->values();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = grads[i][j];
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] = p[j] * decay - o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
        }
    }
}

void adamw_step(std::span<Tensor* const> params, AdamWState& state) {
    std::vector<std::span<const double>> grads;
    grads.reserve(params.size());
    for (Tensor* p : params) grads.push_back(p->grad());
    adamw_step(params, grads, state);
}

}  // namespace debiaslab::ad
