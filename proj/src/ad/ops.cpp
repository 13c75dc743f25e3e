#include "debiaslab/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "debiaslab/ad/kernels.hpp"
#include "debiaslab/errors.hpp"

namespace debiaslab::ad {
namespace {

constexpr double kMinRowNorm = 1e-12;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                             shape_to_string(b.shape()) + " differ");
    }
}

void require_labels(std::span<const int> labels, std::size_t rows, std::size_t classes, const char* op) {
    if (labels.size() != rows) {
        throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(rows) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw IndexError(std::string(op) + ": label " + std::to_string(y) + " outside [0," +
                             std::to_string(classes) + ")");
        }
    }
}

Tensor log_softmax_rows(const Tensor& logits) {
    const std::size_t n = logits.rows();
    const std::size_t k = logits.cols();
    Tensor out(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        auto in = logits.row(i);
        auto dst = out.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double s = 0.0;
        for (std::size_t c = 0; c < k; ++c) s += std::exp(in[c] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < k; ++c) dst[c] = in[c] - lse;
    }
    return out;
}

}  // namespace

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
        throw DimensionError("matmul: incompatible shapes " + shape_to_string(av.shape()) + " and " +
                             shape_to_string(bv.shape()));
    }
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    kernels::gemm(av.values(), bv.values(), out.values(), m, k, n);
    return a.tape->record(std::move(out), {a, b}, [m, k, n](const BackwardArgs& g) {
        if (!g.input_grads[0].empty()) {
            kernels::gemm_bt_acc(g.output_grad, g.inputs[1]->values(), g.input_grads[0], m, n, k);
        }
        if (!g.input_grads[1].empty()) {
            kernels::gemm_at_acc(g.inputs[0]->values(), g.output_grad, g.input_grads[1], m, k, n);
        }
    });
}

Var add_row_bias(Var x, Var bias) {
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    require_matrix(xv, "add_row_bias");
    if (bv.numel() != xv.cols()) {
        throw DimensionError("add_row_bias: bias " + shape_to_string(bv.shape()) + " does not match " +
                             shape_to_string(xv.shape()));
    }
    const std::size_t n = xv.rows(), m = xv.cols();
    Tensor out = xv;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < m; ++j) r[j] += bv.values()[j];
    }
    return x.tape->record(std::move(out), {x, bias}, [n, m](const BackwardArgs& g) {
        if (!g.input_grads[0].empty()) {
            for (std::size_t i = 0; i < n * m; ++i) g.input_grads[0][i] += g.output_grad[i];
        }
        if (!g.input_grads[1].empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < m; ++j) g.input_grads[1][j] += g.output_grad[i * m + j];
            }
        }
    });
}

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    auto o = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return a.tape->record(std::move(out), {a, b}, [](const BackwardArgs& g) {
        for (auto& dst : g.input_grads) {
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.output_grad[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    auto o = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return a.tape->record(std::move(out), {a, b}, [](const BackwardArgs& g) {
        for (std::size_t i = 0; i < g.input_grads[0].size(); ++i) g.input_grads[0][i] += g.output_grad[i];
        for (std::size_t i = 0; i < g.input_grads[1].size(); ++i) g.input_grads[1][i] -= g.output_grad[i];
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    auto o = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    return a.tape->record(std::move(out), {a, b}, [](const BackwardArgs& g) {
        auto av = g.inputs[0]->values();
        auto bv = g.inputs[1]->values();
        for (std::size_t i = 0; i < g.input_grads[0].size(); ++i) g.input_grads[0][i] += g.output_grad[i] * bv[i];
        for (std::size_t i = 0; i < g.input_grads[1].size(); ++i) g.input_grads[1][i] += g.output_grad[i] * av[i];
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= factor;
    return a.tape->record(std::move(out), {a}, [factor](const BackwardArgs& g) {
        for (std::size_t i = 0; i < g.input_grads[0].size(); ++i) g.input_grads[0][i] += factor * g.output_grad[i];
    });
}

Var add_constant(Var a, const Tensor& c) {
    require_same_shape(a.value(), c, "add_constant");
    Tensor out = a.value();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += c.values()[i];
    return a.tape->record(std::move(out), {a}, [](const BackwardArgs& g) {
        for (std::size_t i = 0; i < g.input_grads[0].size(); ++i) g.input_grads[0][i] += g.output_grad[i];
    });
}

Var tanh(Var a) {
    Tensor out = a.value();
    for (double& v : out.values()) v = std::tanh(v);
    return a.tape->record(std::move(out), {a}, [](const BackwardArgs& g) {
        auto y = g.output.values();
        for (std::size_t i = 0; i < g.input_grads[0].size(); ++i) {
            g.input_grads[0][i] += g.output_grad[i] * (1.0 - y[i] * y[i]);
        }
    });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
    const Tensor& in = a.value();
    require_matrix(in, "gather_rows");
    const std::size_t d = in.cols();
    Tensor out({rows.size(), d});
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= in.rows()) throw IndexError("gather_rows: row " + std::to_string(idx[i]) + " out of range");
        std::copy(in.row(idx[i]).begin(), in.row(idx[i]).end(), out.row(i).begin());
    }
    return a.tape->record(std::move(out), {a}, [d, idx = std::move(idx)](const BackwardArgs& g) {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < d; ++j) g.input_grads[0][idx[i] * d + j] += g.output_grad[i * d + j];
        }
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return a.tape->record(Tensor::scalar(s), {a}, [](const BackwardArgs& g) {
        for (double& d : g.input_grads[0]) d += g.output_grad[0];
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().numel());
    return scale(sum(a), 1.0 / n);
}

Var l2_normalize(Var v) {
    const Tensor& in = v.value();
    require_matrix(in, "l2_normalize");
    const std::size_t n = in.rows(), d = in.cols();
    Tensor out = in;
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = out.row(i);
        double ss = 0.0;
        for (double x : r) ss += x * x;
        const double norm = std::sqrt(ss);
        if (!(norm >= kMinRowNorm)) {
            throw DegenerateError("l2_normalize: row " + std::to_string(i) + " has norm " + std::to_string(norm));
        }
        norms[i] = norm;
        for (double& x : r) x /= norm;
    }
    return v.tape->record(std::move(out), {v}, [n, d, norms = std::move(norms)](const BackwardArgs& g) {
        // d(x/|x|) = (I − uuᵀ)/|x|
        for (std::size_t i = 0; i < n; ++i) {
            const double* u = g.output.values().data() + i * d;
            const double* go = g.output_grad.data() + i * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += u[j] * go[j];
            double* gi = g.input_grads[0].data() + i * d;
            for (std::size_t j = 0; j < d; ++j) gi[j] += (go[j] - dot * u[j]) / norms[i];
        }
    });
}

Var log_softmax(Var logits) {
    require_matrix(logits.value(), "log_softmax");
    Tensor out = log_softmax_rows(logits.value());
    const std::size_t n = out.rows(), k = out.cols();
    return logits.tape->record(std::move(out), {logits}, [n, k](const BackwardArgs& g) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* lp = g.output.values().data() + i * k;
            const double* go = g.output_grad.data() + i * k;
            double total = 0.0;
            for (std::size_t c = 0; c < k; ++c) total += go[c];
            double* gi = g.input_grads[0].data() + i * k;
            for (std::size_t c = 0; c < k; ++c) gi[c] += go[c] - std::exp(lp[c]) * total;
        }
    });
}

Var pick(Var logp, std::span<const int> labels) {
    const Tensor& lp = logp.value();
    require_matrix(lp, "pick");
    const std::size_t n = lp.rows(), k = lp.cols();
    require_labels(labels, n, k, "pick");
    Tensor out({n, 1});
    std::vector<int> y(labels.begin(), labels.end());
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = lp(i, static_cast<std::size_t>(y[i]));
    return logp.tape->record(std::move(out), {logp}, [k, y = std::move(y)](const BackwardArgs& g) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            g.input_grads[0][i * k + static_cast<std::size_t>(y[i])] += g.output_grad[i];
        }
    });
}

Var log_softmax_ce(Var logits, std::span<const int> labels) {
    require_matrix(logits.value(), "log_softmax_ce");
    require_labels(labels, logits.value().rows(), logits.value().cols(), "log_softmax_ce");
    return scale(mean(pick(log_softmax(logits), labels)), -1.0);
}

Var weighted_mean(Var column, std::span<const double> weights) {
    const Tensor& x = column.value();
    if (weights.size() != x.numel()) {
        throw DimensionError("weighted_mean: " + std::to_string(weights.size()) + " weights for " +
                             shape_to_string(x.shape()));
    }
    const double n = static_cast<double>(x.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += weights[i] * x.values()[i];
    std::vector<double> w(weights.begin(), weights.end());
    return column.tape->record(Tensor::scalar(s / n), {column}, [n, w = std::move(w)](const BackwardArgs& g) {
        for (std::size_t i = 0; i < w.size(); ++i) g.input_grads[0][i] += g.output_grad[0] * w[i] / n;
    });
}

Var soft_cross_entropy(Var logp, const Tensor& target) {
    require_same_shape(logp.value(), target, "soft_cross_entropy");
    const std::size_t n = logp.value().rows();
    double s = 0.0;
    for (std::size_t i = 0; i < target.numel(); ++i) s += target.values()[i] * logp.value().values()[i];
    Tensor t = target;
    return logp.tape->record(Tensor::scalar(-s / static_cast<double>(n)), {logp},
                             [n, t = std::move(t)](const BackwardArgs& g) {
                                 const double f = -g.output_grad[0] / static_cast<double>(n);
                                 for (std::size_t i = 0; i < t.numel(); ++i) g.input_grads[0][i] += f * t.values()[i];
                             });
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor out = log_softmax_rows(logits);
    for (double& v : out.values()) v = std::exp(v);
    return out;
}

void l2_normalize_rows_inplace(Tensor& t) {
    for (std::size_t i = 0; i < t.rows(); ++i) {
        auto r = t.row(i);
        double ss = 0.0;
        for (double x : r) ss += x * x;
        const double norm = std::sqrt(ss);
        if (!(norm >= kMinRowNorm)) {
            throw DegenerateError("l2_normalize: row " + std::to_string(i) + " has norm " + std::to_string(norm));
        }
        for (double& x : r) x /= norm;
    }
}

}  // namespace debiaslab::ad
