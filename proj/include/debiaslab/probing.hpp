#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "debiaslab/ad/tensor.hpp"
#include "debiaslab/datagen.hpp"
#include "debiaslab/models.hpp"
#include "json.hpp"

namespace debiaslab::probing {

/// Linear softmax probe trained full-batch with AdamW on standardized inputs.
struct ProbeConfig {
    /// Strictly increasing prefix sizes ending at n; empty selects
    /// default_schedule(n).
    std::vector<std::size_t> schedule;
    std::size_t steps = 500;
    double learning_rate = 0.05;
    double weight_decay = 0.01;
    std::size_t label_classes = 2;
    double accuracy_split = 0.7;
    std::uint64_t seed = 0;
};

/// Doubling blocks from max(32, n/256), capped at n.
std::vector<std::size_t> default_schedule(std::size_t n);

/// Throws ConfigError unless the schedule is strictly increasing, starts at
/// ≥ 2·label_classes and ends at n.
void validate_schedule(std::span<const std::size_t> schedule, std::size_t n, std::size_t label_classes);

struct ProbeReport {
    double online_bits = 0.0;
    double uniform_bits = 0.0;
    double compression = 0.0;
    double probe_accuracy = 0.0;
    std::size_t epoch = 0;
    std::string bias_label = "bias_aligned";
    std::size_t samples = 0;
    std::vector<std::size_t> schedule;
};

nlohmann::json to_json(const ProbeReport& report, const ProbeConfig& config);

/// Prequential codelength of `labels` given `representations`; the first
/// block is sent with the uniform code. Fills the codelength fields only.
ProbeReport online_codelength(const ad::Tensor& representations, std::span<const int> labels,
                              const ProbeConfig& config);

/// Held-out accuracy of a probe trained on a seeded `split_fraction` of rows.
/// Throws ContractError when the training split holds a single class.
double probe_accuracy(const ad::Tensor& representations, std::span<const int> labels, double split_fraction,
                      std::uint64_t seed, const ProbeConfig& config = {});

/// bias_aligned as 0/1 labels.
std::vector<int> alignment_labels(const data::Dataset& dataset);

/// One report per stored epoch on the bias_aligned labels of `probe_set`.
std::vector<ProbeReport> probe_checkpoints(const models::CheckpointStore& checkpoints, const data::Dataset& probe_set,
                                           const ProbeConfig& config);
ProbeReport probe_model(const models::Model& model, const data::Dataset& probe_set, const ProbeConfig& config,
                        std::size_t epoch);

struct Projection {
    ad::Tensor coordinates;  // n × dims
    std::vector<double> explained_variance;
    bool rank_deficient = false;
};

/// Projection of centered rows onto the top principal components; each
/// component's largest-magnitude loading is made positive. Components with
/// (numerically) zero variance are zero-filled and flagged.
Projection pca_project(const ad::Tensor& representations, std::size_t dims = 2);

/// CSV with header id,x,y,label,bias_aligned.
void write_pca_csv(const std::filesystem::path& path, const data::Dataset& dataset, const Projection& projection);

}  // namespace debiaslab::probing
