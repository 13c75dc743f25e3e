#include "debiaslab/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace debiaslab::ad {
namespace {

double evaluate(const ForwardFn& forward, std::span<Tensor* const> params) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (Tensor* p : params) vars.push_back(tape.constant(*p));
    return forward(tape, vars).item();
}

}  // namespace

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << (passed ? "pass" : "FAIL") << " max_rel_err=" << max_relative_error << " over " << entries_checked
       << " entries (worst: param " << worst_param << "[" << worst_index << "] analytic=" << worst_analytic
       << " numeric=" << worst_numeric << ")";
    return os.str();
}

GradCheckReport grad_check(const ForwardFn& forward, std::span<Tensor* const> params, double tolerance,
                           double step, double abs_floor) {
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (Tensor* p : params) vars.push_back(tape.variable(*p));
        Var loss = forward(tape, vars);
        tape.backward(loss);
        for (const Var& v : vars) {
            auto g = tape.grad(v);
            analytic.emplace_back(g.begin(), g.end());
        }
    }

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto values = params[pi]->values();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double saved = values[j];
            values[j] = saved + step;
            const double up = evaluate(forward, params);
            values[j] = saved - step;
            const double down = evaluate(forward, params);
            values[j] = saved;

            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[pi].empty() ? 0.0 : analytic[pi][j];
            const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
            const double err = std::abs(a - numeric) / denom;
            ++report.entries_checked;
            if (!(err <= report.max_relative_error)) {
                report.max_relative_error = err;
                report.worst_param = pi;
                report.worst_index = j;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

}  // namespace debiaslab::ad
