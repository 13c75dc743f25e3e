#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "debiaslab/contrastive.hpp"
#include "debiaslab/datagen.hpp"
#include "debiaslab/models.hpp"
#include "debiaslab/sampling.hpp"

namespace debiaslab::harness {

enum class Method { ce, reweight, poe, conf_reg, dct };
const char* method_name(Method m);
Method method_from_name(const std::string& name);

enum class PositiveSpace { bias_encoder, debias_encoder };
enum class PositiveSchedule { per_epoch, static_final };

struct ExperimentConfig {
    data::GeneratorConfig generator;
    Method method = Method::dct;
    std::size_t epochs = 5;
    std::size_t batch_size = 64;
    std::string preset = "desk";
    double learning_rate = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;

    // models
    std::vector<std::size_t> debias_hidden{64};
    std::size_t debias_repr = 32;
    std::vector<std::size_t> bias_hidden{4};
    std::size_t bias_repr = 8;
    std::size_t bias_epochs = 5;
    double bias_learning_rate = 2e-4;

    // contrastive objective
    // The desk preset's 0.2 suits 32-dim MLP representations; paper-bert uses 0.04.
    double tau = 0.2;
    double lambda = 0.6;
    double momentum = 0.999;
    double alpha = 0.1;
    std::size_t positives = 150;
    std::size_t dynamic_negatives = 1;
    std::size_t queue_capacity = 4096;
    double warmup_fraction = 0.25;

    // ablation switches
    bool disable_debias_positives = false;
    bool disable_dynamic_negatives = false;
    PositiveSpace positive_space = PositiveSpace::bias_encoder;
    PositiveSchedule positive_schedule = PositiveSchedule::per_epoch;
    bool positives_same_label = true;
    contrastive::Denominator denominator = contrastive::Denominator::negatives_only;
    models::MomentumConvention momentum_convention = models::MomentumConvention::standard;
    sampling::FilterSource filter_source = sampling::FilterSource::final_epoch;
    /// Plain CE on the debias-augmented training set (objective-reduction runs).
    bool ce_on_augmented = false;

    // probing
    bool probe = true;
    std::size_t probe_size = 2000;
    std::size_t probe_steps = 500;
    double probe_learning_rate = 0.05;
    double probe_weight_decay = 0.01;
    double probe_split = 0.7;

    std::filesystem::path output_root = "runs";

    void validate() const;

    /// Sets "section.key" from its text form. Throws ConfigError for unknown
    /// keys or unparsable values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    /// INI text with every key, in canonical order.
    std::string to_ini() const;
    /// Stable 64-bit FNV-1a hash of to_ini() without output_root, as 16 hex digits.
    std::string hash() const;

    /// Whether training needs the bias-only model.
    bool needs_bias_model() const;
    /// Whether the main model trains on the debias-augmented set.
    bool uses_augmented_train() const;
};

/// Seeds for independent random streams derived from the master seed.
std::uint64_t derive_seed(std::uint64_t master, const std::string& stream);

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& ini_text);

/// Applies DEBIAS_LAB_SEED when set; returns true if it did.
bool apply_seed_env(ExperimentConfig& config);

}  // namespace debiaslab::harness
