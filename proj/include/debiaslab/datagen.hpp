#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "debiaslab/ad/tensor.hpp"

namespace debiaslab::data {

using SampleId = std::int64_t;

/// Synthetic task with a task-relevant feature block followed by a bias block.
struct GeneratorConfig {
    std::size_t num_classes = 3;
    std::size_t n_train = 20000;
    std::size_t n_dev = 3000;
    std::size_t n_ood = 3000;
    std::size_t task_dim = 16;
    std::size_t bias_dim = 8;
    double rho_train = 0.95;
    double rho_ood = 0.0;
    double sigma_task = 1.0;
    double sigma_bias = 1.0;
    /// Pairwise distance between task prototypes, in units of sigma_task (≥ 4).
    double task_separation = 4.0;
    /// Pairwise distance between bias prototypes, in units of sigma_bias.
    double bias_separation = 32.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Sample {
    SampleId id = 0;
    std::vector<double> features;
    int label = 0;
    bool bias_aligned = false;
    /// Id of the sample this one duplicates; equals `id` for originals.
    SampleId origin = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split { train, id_dev, ood };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Dataset {
    std::vector<Sample> samples;
    Split split = Split::train;
    std::string provenance;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::size_t feature_dim() const;
    std::size_t num_classes() const;

    /// n×d matrix of features (rows in dataset order).
    ad::Tensor features() const;
    ad::Tensor features(std::span<const std::size_t> rows) const;
    std::vector<int> labels() const;
    /// id → row index. Throws SchemaError on duplicate ids.
    std::unordered_map<SampleId, std::size_t> index_by_id() const;

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.split == b.split && a.samples == b.samples;
    }
};

struct GeneratedData {
    Dataset train;
    Dataset id_dev;
    Dataset ood;
};

/// Prototype vertices of a regular simplex with the given pairwise distance,
/// embedded in `dim` dimensions (rows = classes). Throws ConfigError when
/// dim < num_classes − 1.
ad::Tensor simplex_prototypes(std::size_t num_classes, std::size_t dim, double pairwise_distance);

/// Draws train / id_dev / ood splits. Ids are unique across all three splits.
GeneratedData generate(const GeneratorConfig& config);

/// JSONL: one {"id","features","label","bias_aligned"} object per line.
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path, Split split = Split::train);

/// Fraction of bias-aligned samples. Throws ContractError when empty.
double measure_alignment(const Dataset& dataset);

}  // namespace debiaslab::data
