#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "debiaslab/ad/tape.hpp"
#include "debiaslab/ad/tensor.hpp"

namespace debiaslab::models {

struct EncoderConfig {
    std::size_t input_dim = 24;
    std::vector<std::size_t> hidden_dims{64};
    std::size_t repr_dim = 32;
    std::uint64_t init_seed = 0;

    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

EncoderConfig default_debias_encoder(std::size_t input_dim, std::uint64_t seed);
EncoderConfig default_bias_encoder(std::size_t input_dim, std::uint64_t seed);

enum class Role { debias, momentum, bias_only };
const char* role_name(Role r);
Role role_from_name(const std::string& name);

struct Linear {
    ad::Tensor weight;  // in × out
    ad::Tensor bias;    // 1 × out
};

/// tanh MLP encoder with L2-normalized output and a linear classification head.
class Model {
public:
    Model(EncoderConfig config, std::size_t num_classes, Role role);

    const EncoderConfig& config() const noexcept { return config_; }
    std::size_t num_classes() const noexcept { return num_classes_; }
    Role role() const noexcept { return role_; }
    void set_role(Role r) noexcept { role_ = r; }

    std::vector<Linear>& encoder() noexcept { return encoder_; }
    const std::vector<Linear>& encoder() const noexcept { return encoder_; }
    Linear& head() noexcept { return head_; }
    const Linear& head() const noexcept { return head_; }

    /// Encoder layers followed by the head, weight before bias.
    std::vector<ad::Tensor*> parameters();
    std::vector<const ad::Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
    std::size_t parameter_count() const;

    /// Parameters handed to the optimizer. Throws ContractError for the
    /// momentum role, which only changes through momentum_update().
    std::vector<ad::Tensor*> trainable_parameters();
    void zero_grad();

    bool same_architecture(const Model& other) const;

private:
    EncoderConfig config_;
    std::size_t num_classes_;
    Role role_;
    std::vector<Linear> encoder_;
    Linear head_;
};

/// Model parameters recorded on a tape.
struct BoundModel {
    std::vector<std::pair<ad::Var, ad::Var>> encoder;
    std::pair<ad::Var, ad::Var> head;
};

/// Debias and bias-only roles bind as gradient-receiving parameters; the
/// momentum role binds as constants.
BoundModel bind(ad::Tape& tape, Model& model);

ad::Var encode(const BoundModel& model, ad::Var features);
ad::Var classify(const BoundModel& model, ad::Var representations);

/// Tape-free forward passes.
ad::Tensor encode(const Model& model, const ad::Tensor& features);
ad::Tensor classify(const Model& model, const ad::Tensor& representations);
/// encode in row blocks, for large datasets.
ad::Tensor encode_batched(const Model& model, const ad::Tensor& features, std::size_t block = 4096);

enum class MomentumConvention {
    /// θ' ← m·θ' + (1−m)·θ
    standard,
    /// θ' ← m·θ + (1−m)·θ', with the weights' roles swapped
    swapped,
};

void momentum_update(Model& momentum_model, const Model& debias_model, double m,
                     MomentumConvention convention = MomentumConvention::standard);

/// Frozen per-epoch parameter copies with contiguous keys 0..size()-1.
class CheckpointStore {
public:
    void save(std::size_t epoch, const Model& model);
    std::shared_ptr<const Model> load(std::size_t epoch) const;
    std::size_t size() const noexcept { return frozen_.size(); }
    bool empty() const noexcept { return frozen_.empty(); }

private:
    std::vector<std::shared_ptr<const Model>> frozen_;
};

/// JSON dump of named parameter arrays with shapes and the architecture.
void write_checkpoint(const std::filesystem::path& path, const Model& model);
Model read_checkpoint(const std::filesystem::path& path);

}  // namespace debiaslab::models
