#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "debiaslab/ad/tape.hpp"
#include "debiaslab/ad/tensor.hpp"
#include "debiaslab/datagen.hpp"

namespace debiaslab::contrastive {

using data::SampleId;

/// Fixed-capacity FIFO of unit-norm momentum representations.
class MomentumQueue {
public:
    MomentumQueue(std::size_t capacity, std::size_t repr_dim);

    /// Appends rows in order, evicting the oldest entries once full. Rows must
    /// be unit-norm (ContractError otherwise).
    void push(const ad::Tensor& representations, std::span<const int> labels, std::span<const SampleId> ids);

    std::size_t size() const noexcept { return fill_; }
    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t repr_dim() const noexcept { return dim_; }
    bool empty() const noexcept { return fill_ == 0; }

    // Entry 0 is the oldest live entry.
    std::span<const double> representation(std::size_t i) const;
    int label(std::size_t i) const;
    SampleId source_id(std::size_t i) const;
    bool contains(SampleId id) const { return live_ids_.count(id) > 0; }

    std::uint64_t total_pushed() const noexcept { return pushed_; }
    std::uint64_t evictions() const noexcept { return pushed_ > capacity_ ? pushed_ - capacity_ : 0; }

    /// Live entries, oldest first, as a size() × repr_dim matrix.
    ad::Tensor snapshot() const;

private:
    std::size_t physical(std::size_t i) const;

    std::size_t capacity_;
    std::size_t dim_;
    std::vector<double> reprs_;
    std::vector<int> labels_;
    std::vector<SampleId> ids_;
    std::size_t head_ = 0;  // physical slot of the oldest entry
    std::size_t fill_ = 0;
    std::uint64_t pushed_ = 0;
    std::unordered_map<SampleId, std::size_t> live_ids_;
};

/// Which rows form an anchor's negative set.
struct NegativeSelection {
    std::vector<std::size_t> queue_entries;     // logical queue indices
    std::vector<std::size_t> dynamic_entries;   // indices into the dynamic list
    std::size_t size() const noexcept { return queue_entries.size() + dynamic_entries.size(); }
};

/// Queue entries whose label differs from the anchor's, plus the dynamic
/// negatives not already present in the queue (matched by source id).
/// Returns nullopt on negative starvation.
std::optional<NegativeSelection> select_negatives(const MomentumQueue& queue, int anchor_label,
                                                  std::span<const SampleId> dynamic_ids);

struct NegativeSet {
    ad::Tensor representations;
    std::vector<SampleId> ids;
};

std::optional<NegativeSet> gather_negatives(const MomentumQueue& queue, int anchor_label,
                                            const ad::Tensor& dynamic_representations,
                                            std::span<const SampleId> dynamic_ids);

/// Gradient-free representations shared by a batch of anchors, with per-anchor
/// row lists for positives and negatives.
struct ContrastiveBatch {
    ad::Tensor bank;
    std::vector<std::vector<std::uint32_t>> positives;
    std::vector<std::vector<std::uint32_t>> negatives;

    /// Stacks per-anchor positive and negative matrices into one bank.
    static ContrastiveBatch from_sets(std::span<const ad::Tensor> positives, std::span<const ad::Tensor> negatives);
};

enum class Denominator {
    /// Σ over negatives only; the positive is excluded.
    negatives_only,
    /// InfoNCE form: the positive joins its own denominator.
    with_positive,
};

/// Mean over anchors of
///   −(1/|P_i|) Σ_{j∈P_i} log( exp(a_i·p_j/τ) / Σ_{k∈N_i} exp(a_i·n_k/τ) ).
/// Gradients flow into `anchors` only. Every anchor needs at least one
/// positive and one negative (ContractError otherwise).
ad::Var dct_loss(ad::Var anchors, const ContrastiveBatch& batch, double tau,
                 Denominator denominator = Denominator::negatives_only);

/// (1 − α)·ce + α·dct. α outside [0,1] raises ConfigError.
ad::Var combined_loss(ad::Var ce, ad::Var dct, double alpha);

}  // namespace debiaslab::contrastive
