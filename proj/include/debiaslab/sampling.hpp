#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "debiaslab/ad/tensor.hpp"
#include "debiaslab/datagen.hpp"
#include "debiaslab/models.hpp"

namespace debiaslab::sampling {

using data::SampleId;

/// Row-per-sample embedding matrix addressable by sample id.
struct EmbeddingTable {
    ad::Tensor rows;
    std::vector<SampleId> ids;
    std::unordered_map<SampleId, std::size_t> row_of;

    EmbeddingTable() = default;
    EmbeddingTable(ad::Tensor rows, std::vector<SampleId> ids);

    std::size_t dim() const { return rows.cols(); }
    /// Throws LookupError for unknown ids.
    std::span<const double> of(SampleId id) const;
};

/// Outputs of the trained bias-only model over the training set.
struct BiasProfile {
    std::size_t num_classes = 0;
    std::vector<SampleId> ids;
    std::unordered_map<SampleId, std::size_t> row_of;
    /// Final-epoch softmax probabilities, n × K.
    ad::Tensor probabilities;
    /// Per-epoch softmax probabilities.
    std::vector<ad::Tensor> epoch_probabilities;
    /// Per-epoch encoder outputs.
    std::vector<EmbeddingTable> embeddings;

    std::size_t epochs() const noexcept { return embeddings.size(); }
    std::span<const double> probs(SampleId id) const;
    std::span<const double> probs(SampleId id, std::size_t epoch) const;
};

/// Encodes `train` with every checkpoint 0..epochs−1; probabilities come from
/// the last. Throws LookupError if a checkpoint is missing.
BiasProfile compute_bias_profile(const models::CheckpointStore& checkpoints, const data::Dataset& train,
                                 std::size_t epochs);
BiasProfile compute_bias_profile(const models::CheckpointStore& checkpoints, const data::Dataset& train);

/// Argmax with ties toward the lower class index.
std::size_t argmax(std::span<const double> row);

/// The bias model is confident (top-class probability ≥ λ) and wrong.
bool debias_predicate(std::span<const double> probs, int label, double lambda);

enum class FilterSource {
    final_epoch,
    /// Predicate holds for the probabilities of at least one epoch.
    any_epoch,
};

struct DebiasSet {
    std::vector<SampleId> ids;  // ascending
    double lambda = 0.0;

    std::size_t size() const noexcept { return ids.size(); }
    bool empty() const noexcept { return ids.empty(); }
    bool contains(SampleId id) const;
};

DebiasSet filter_debias(const data::Dataset& train, const BiasProfile& profile, double lambda,
                        FilterSource source = FilterSource::final_epoch);

/// One id per line, ascending.
void write_debias_ids(const std::filesystem::path& path, const DebiasSet& set);
DebiasSet read_debias_ids(const std::filesystem::path& path, double lambda);

struct PositiveOptions {
    /// Restrict the pool to the anchor's label.
    bool same_label = true;
};

/// The `count` members of the debias set (optionally restricted to the
/// anchor's label, never the anchor itself) farthest from the anchor in
/// `space`, by descending L2 distance with ties to the lower id. Returns
/// nullopt when the pool is empty (positive starvation).
///
/// `train` resolves ids to labels and embedding rows; duplicated samples use
/// the row of their origin.
std::optional<std::vector<SampleId>> select_positives(SampleId anchor_id, const data::Dataset& train,
                                                      const DebiasSet& debias_set, const EmbeddingTable& space,
                                                      std::size_t count, PositiveOptions options = {});
std::optional<std::vector<SampleId>> select_positives(SampleId anchor_id, const data::Dataset& train,
                                                      const DebiasSet& debias_set, const BiasProfile& profile,
                                                      std::size_t epoch, std::size_t count,
                                                      PositiveOptions options = {});

/// The `count` samples of `candidates` with a label different from the
/// anchor's that are nearest in `space`, by ascending L2 distance with ties to
/// the lower id. Throws ContractError if no such sample exists.
std::vector<SampleId> select_dynamic_negatives(SampleId anchor_id, const data::Dataset& anchors,
                                               const data::Dataset& candidates, const EmbeddingTable& space,
                                               std::size_t count);
std::vector<SampleId> select_dynamic_negatives(SampleId anchor_id, const data::Dataset& train,
                                               const BiasProfile& profile, std::size_t epoch, std::size_t count);

/// Per-sample selections for a whole dataset, row-aligned with `anchors`.
std::vector<std::optional<std::vector<SampleId>>> select_positives_all(const data::Dataset& anchors,
                                                                       const data::Dataset& train,
                                                                       const DebiasSet& debias_set,
                                                                       const EmbeddingTable& space,
                                                                       std::size_t count,
                                                                       PositiveOptions options = {});
std::vector<std::vector<SampleId>> select_dynamic_negatives_all(const data::Dataset& anchors,
                                                                const data::Dataset& candidates,
                                                                const EmbeddingTable& space, std::size_t count);

/// Appends one copy of every debias-set sample with a fresh id; the copy's
/// `origin` names the original. Throws LookupError for ids not in `train`.
data::Dataset augment_train(const data::Dataset& train, const DebiasSet& debias_set);

}  // namespace debiaslab::sampling
