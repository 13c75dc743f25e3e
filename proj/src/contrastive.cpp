#include "debiaslab/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "debiaslab/ad/kernels.hpp"
#include "debiaslab/ad/ops.hpp"
#include "debiaslab/errors.hpp"

namespace debiaslab::contrastive {
namespace {

constexpr double kUnitTolerance = 1e-8;

bool unit_norm(std::span<const double> row) {
    double ss = 0.0;
    for (double v : row) ss += v * v;
    return std::abs(std::sqrt(ss) - 1.0) <= kUnitTolerance;
}

void require_unit_rows(const ad::Tensor& t, const char* what) {
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (!unit_norm(t.row(i))) {
            throw ContractError(std::string(what) + ": row " + std::to_string(i) + " is not unit-norm");
        }
    }
}

}  // namespace

MomentumQueue::MomentumQueue(std::size_t capacity, std::size_t repr_dim)
    : capacity_(capacity), dim_(repr_dim), reprs_(capacity * repr_dim), labels_(capacity), ids_(capacity) {
    if (capacity == 0 || repr_dim == 0) throw ConfigError("queue capacity and width must be >= 1");
}

std::size_t MomentumQueue::physical(std::size_t i) const {
    if (i >= fill_) throw LookupError("queue index " + std::to_string(i) + " beyond fill " + std::to_string(fill_));
    return (head_ + i) % capacity_;
}

void MomentumQueue::push(const ad::Tensor& representations, std::span<const int> labels,
                         std::span<const SampleId> ids) {
    ad::require_matrix(representations, "queue_push");
    if (representations.cols() != dim_) {
        throw DimensionError("queue_push: width " + std::to_string(representations.cols()) + " != " +
                             std::to_string(dim_));
    }
    const std::size_t n = representations.rows();
    if (labels.size() != n || ids.size() != n) throw DimensionError("queue_push: labels/ids do not match rows");
    require_unit_rows(representations, "queue_push");

    for (std::size_t r = 0; r < n; ++r) {
        std::size_t slot;
        if (fill_ == capacity_) {
            slot = head_;
            auto it = live_ids_.find(ids_[slot]);
            if (--it->second == 0) live_ids_.erase(it);
            head_ = (head_ + 1) % capacity_;
        } else {
            slot = (head_ + fill_) % capacity_;
            ++fill_;
        }
        auto src = representations.row(r);
        std::copy(src.begin(), src.end(), reprs_.begin() + static_cast<std::ptrdiff_t>(slot * dim_));
        labels_[slot] = labels[r];
        ids_[slot] = ids[r];
        ++live_ids_[ids[r]];
        ++pushed_;
    }
}

std::span<const double> MomentumQueue::representation(std::size_t i) const {
    return std::span<const double>(reprs_).subspan(physical(i) * dim_, dim_);
}

int MomentumQueue::label(std::size_t i) const { return labels_[physical(i)]; }

SampleId MomentumQueue::source_id(std::size_t i) const { return ids_[physical(i)]; }

ad::Tensor MomentumQueue::snapshot() const {
    ad::Tensor out({fill_, dim_});
    for (std::size_t i = 0; i < fill_; ++i) {
        auto src = representation(i);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::optional<NegativeSelection> select_negatives(const MomentumQueue& queue, int anchor_label,
                                                  std::span<const SampleId> dynamic_ids) {
    NegativeSelection sel;
    for (std::size_t i = 0; i < queue.size(); ++i) {
        if (queue.label(i) != anchor_label) sel.queue_entries.push_back(i);
    }
    for (std::size_t j = 0; j < dynamic_ids.size(); ++j) {
        if (queue.contains(dynamic_ids[j])) continue;
        const bool repeated = std::find(dynamic_ids.begin(), dynamic_ids.begin() + static_cast<std::ptrdiff_t>(j),
                                        dynamic_ids[j]) != dynamic_ids.begin() + static_cast<std::ptrdiff_t>(j);
        if (!repeated) sel.dynamic_entries.push_back(j);
    }
    if (sel.size() == 0) return std::nullopt;
    return sel;
}

std::optional<NegativeSet> gather_negatives(const MomentumQueue& queue, int anchor_label,
                                            const ad::Tensor& dynamic_representations,
                                            std::span<const SampleId> dynamic_ids) {
    if (dynamic_representations.numel() > 0 && dynamic_representations.rows() != dynamic_ids.size()) {
        throw DimensionError("gather_negatives: dynamic representations do not match ids");
    }
    auto sel = select_negatives(queue, anchor_label, dynamic_ids);
    if (!sel) return std::nullopt;
    NegativeSet out{ad::Tensor({sel->size(), queue.repr_dim()}), {}};
    std::size_t r = 0;
    for (std::size_t i : sel->queue_entries) {
        auto src = queue.representation(i);
        std::copy(src.begin(), src.end(), out.representations.row(r++).begin());
        out.ids.push_back(queue.source_id(i));
    }
    for (std::size_t j : sel->dynamic_entries) {
        auto src = dynamic_representations.row(j);
        std::copy(src.begin(), src.end(), out.representations.row(r++).begin());
        out.ids.push_back(dynamic_ids[j]);
    }
    return out;
}

ContrastiveBatch ContrastiveBatch::from_sets(std::span<const ad::Tensor> positives,
                                             std::span<const ad::Tensor> negatives) {
    if (positives.size() != negatives.size()) throw DimensionError("from_sets: positive/negative anchor counts differ");
    std::size_t rows = 0, dim = 0;
    for (const auto* group : {&positives, &negatives}) {
        for (const ad::Tensor& t : *group) {
            if (t.numel() == 0) continue;
            ad::require_matrix(t, "from_sets");
            if (dim != 0 && t.cols() != dim) throw DimensionError("from_sets: representation widths differ");
            dim = t.cols();
            rows += t.rows();
        }
    }
    ContrastiveBatch batch;
    batch.bank = ad::Tensor({rows, dim});
    std::uint32_t next = 0;
    auto append = [&](const ad::Tensor& t, std::vector<std::uint32_t>& idx) {
        if (t.numel() == 0) return;
        for (std::size_t r = 0; r < t.rows(); ++r) {
            std::copy(t.row(r).begin(), t.row(r).end(), batch.bank.row(next).begin());
            idx.push_back(next++);
        }
    };
    batch.positives.resize(positives.size());
    batch.negatives.resize(negatives.size());
    for (std::size_t i = 0; i < positives.size(); ++i) {
        append(positives[i], batch.positives[i]);
        append(negatives[i], batch.negatives[i]);
    }
    return batch;
}

ad::Var dct_loss(ad::Var anchors, const ContrastiveBatch& batch, double tau, Denominator denominator) {
    if (!(tau > 0.0)) throw ConfigError("dct_loss: temperature must be > 0");
    const ad::Tensor& a = anchors.value();
    ad::require_matrix(a, "dct_loss");
    const std::size_t n = a.rows(), d = a.cols();
    if (batch.positives.size() != n || batch.negatives.size() != n) {
        throw DimensionError("dct_loss: " + std::to_string(n) + " anchors but " +
                             std::to_string(batch.positives.size()) + " positive / " +
                             std::to_string(batch.negatives.size()) + " negative lists");
    }
    if (n == 0) throw ContractError("dct_loss: no anchors");
    const ad::Tensor& bank = batch.bank;
    ad::require_matrix(bank, "dct_loss bank");
    if (bank.cols() != d) throw DimensionError("dct_loss: bank width differs from anchor width");
    const std::size_t m = bank.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.positives[i].empty()) throw ContractError("dct_loss: anchor " + std::to_string(i) + " has no positive");
        if (batch.negatives[i].empty()) throw ContractError("dct_loss: anchor " + std::to_string(i) + " has no negative");
        for (auto r : batch.positives[i]) {
            if (r >= m) throw LookupError("dct_loss: positive row out of range");
        }
        for (auto r : batch.negatives[i]) {
            if (r >= m) throw LookupError("dct_loss: negative row out of range");
        }
    }
    require_unit_rows(a, "dct_loss anchors");
    require_unit_rows(bank, "dct_loss bank");

    // logits(i, r) = a_i · bank_r / τ
    std::vector<double> logits(n * m, 0.0);
    ad::kernels::gemm_bt_acc(a.values(), bank.values(), logits, n, d, m);
    for (double& v : logits) v /= tau;

    // dL/dlogits, filled during the forward pass and scaled by the upstream
    // gradient in backward.
    std::vector<double> dlogits(n * m, 0.0);
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* s = logits.data() + i * m;
        double* g = dlogits.data() + i * m;
        const auto& pos = batch.positives[i];
        const auto& neg = batch.negatives[i];
        const double inv_p = 1.0 / static_cast<double>(pos.size());

        double mx = -std::numeric_limits<double>::infinity();
        for (auto k : neg) mx = std::max(mx, s[k]);
        double z = 0.0;
        for (auto k : neg) z += std::exp(s[k] - mx);
        const double lse_neg = mx + std::log(z);

        double loss_i = 0.0;
        if (denominator == Denominator::negatives_only) {
            for (auto j : pos) {
                loss_i -= s[j] - lse_neg;
                g[j] -= inv_p * inv_n;
            }
            for (auto k : neg) g[k] += std::exp(s[k] - lse_neg) * inv_n;
        } else {
            // log(Z_N + e^{s_j}) per positive; the negatives' weight sums over
            // all positives.
            std::vector<double> lse(pos.size());
            for (std::size_t t = 0; t < pos.size(); ++t) {
                const double sj = s[pos[t]];
                const double hi = std::max(lse_neg, sj);
                lse[t] = hi + std::log(std::exp(lse_neg - hi) + std::exp(sj - hi));
                loss_i -= sj - lse[t];
                g[pos[t]] -= inv_p * (1.0 - std::exp(sj - lse[t])) * inv_n;
            }
            // Every lse_j ≥ lse_neg ≥ s_k, so shifting by the smallest keeps
            // both factors bounded.
            const double shift = *std::min_element(lse.begin(), lse.end());
            double neg_weight = 0.0;
            for (double l : lse) neg_weight += std::exp(shift - l);
            for (auto k : neg) g[k] += inv_p * std::exp(s[k] - shift) * neg_weight * inv_n;
        }
        total += loss_i * inv_p;
    }
    const double value = total * inv_n;

    return anchors.tape->record(
        ad::Tensor::scalar(value), {anchors},
        [n, d, m, tau, dlogits = std::move(dlogits), bank_values = bank.data()](const ad::BackwardArgs& g) {
            const double f = g.output_grad[0] / tau;
            std::vector<double> scaled(dlogits.size());
            for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = dlogits[i] * f;
            ad::kernels::gemm_acc(scaled, bank_values, g.input_grads[0], n, m, d);
        });
}

ad::Var combined_loss(ad::Var ce, ad::Var dct, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("combined_loss: alpha must lie in [0,1]");
    if (!ce.value().is_scalar() || !dct.value().is_scalar()) throw ContractError("combined_loss: scalar losses expected");
    return ad::add(ad::scale(ce, 1.0 - alpha), ad::scale(dct, alpha));
}

}  // namespace debiaslab::contrastive
