#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "debiaslab/ad/tape.hpp"

namespace debiaslab::ad {

struct GradCheckReport {
    bool passed = true;
    double max_relative_error = 0.0;
    std::size_t entries_checked = 0;
    std::size_t worst_param = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    std::string summary() const;
};

/// Builds a scalar loss from the bound parameters.
using ForwardFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients with central differences for every parameter entry.
///
/// Relative error per entry is |a − n| / max(|a|, |n|, abs_floor); the report
/// passes when the maximum stays below `tolerance`. Parameter gradients are
/// left as they were on entry.
GradCheckReport grad_check(const ForwardFn& forward, std::span<Tensor* const> params,
                           double tolerance, double step = 1e-5, double abs_floor = 1e-6);

}  // namespace debiaslab::ad
