#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "debiaslab/datagen.hpp"
#include "debiaslab/harness/config.hpp"
#include "debiaslab/models.hpp"
#include "debiaslab/probing.hpp"
#include "debiaslab/sampling.hpp"

namespace debiaslab::harness {

struct BiasArtifacts {
    models::Model model;
    models::CheckpointStore checkpoints;
    sampling::BiasProfile profile;
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
};

struct QueueStats {
    std::uint64_t batches = 0;
    std::uint64_t pushes = 0;
    std::uint64_t evictions = 0;
    std::size_t final_size = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double ce_loss = 0.0;
    std::optional<double> dct_loss;  // mean over batches that had a contrastive term
    double id_accuracy = 0.0;
    double ood_accuracy = 0.0;
    std::size_t batches = 0;
    std::size_t warmup_batches = 0;
    std::size_t dct_anchors = 0;
    std::size_t starved_positive = 0;
    std::size_t starved_negative = 0;
    std::optional<probing::ProbeReport> probe;
};

struct RunReport {
    std::string config_hash;
    Method method = Method::ce;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    std::optional<std::size_t> debias_set_size;
    std::optional<QueueStats> queue;
    std::optional<double> bias_train_accuracy;
    std::optional<std::size_t> poe_clamped;
    std::size_t train_size = 0;
    double id_accuracy = 0.0;
    double ood_accuracy = 0.0;
    double wall_clock_seconds = 0.0;
};

struct TrainResult {
    models::Model model;
    models::CheckpointStore checkpoints;
    RunReport report;
    std::optional<sampling::DebiasSet> debias_set;
};

/// Generates the three splits with the data seed derived from config.seed.
data::GeneratedData generate_data(const ExperimentConfig& config);

/// Plain CE on the low-capacity model over the full training split.
/// Throws DivergenceError on a non-finite loss.
BiasArtifacts train_bias_only(const ExperimentConfig& config, const data::Dataset& train);

/// Trains the main model. `bias` must be present when config.needs_bias_model().
TrainResult train_main(const ExperimentConfig& config, const data::GeneratedData& data, const BiasArtifacts* bias);

/// Argmax-of-logits accuracy, ties toward the lower class index.
double evaluate(const models::Model& model, const data::Dataset& dataset);

/// Probe set: first size/2 samples of id_dev followed by first size/2 of ood.
data::Dataset build_probe_set(const data::GeneratedData& data, std::size_t size);

probing::ProbeConfig probe_config(const ExperimentConfig& config);

/// Runs generate → bias-only → main → evaluate → probe and writes the run
/// directory. Returns the directory.
std::filesystem::path run_experiment(const ExperimentConfig& config, RunReport* report_out = nullptr);

/// output_root / config hash.
std::filesystem::path run_directory(const ExperimentConfig& config);

}  // namespace debiaslab::harness
