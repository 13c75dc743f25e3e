#include "debiaslab/models.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "debiaslab/ad/kernels.hpp"
#include "debiaslab/ad/ops.hpp"
#include "debiaslab/errors.hpp"
#include "json.hpp"

namespace debiaslab::models {

void EncoderConfig::validate() const {
    if (input_dim < 1 || repr_dim < 1) throw ConfigError("encoder dims must be >= 1");
    for (std::size_t h : hidden_dims) {
        if (h < 1) throw ConfigError("encoder hidden dims must be >= 1");
    }
}

EncoderConfig default_debias_encoder(std::size_t input_dim, std::uint64_t seed) {
    return EncoderConfig{input_dim, {64}, 32, seed};
}

EncoderConfig default_bias_encoder(std::size_t input_dim, std::uint64_t seed) {
    return EncoderConfig{input_dim, {4}, 8, seed};
}

const char* role_name(Role r) {
    switch (r) {
        case Role::debias: return "debias";
        case Role::momentum: return "momentum";
        case Role::bias_only: return "bias_only";
    }
    return "debias";
}

Role role_from_name(const std::string& name) {
    if (name == "debias") return Role::debias;
    if (name == "momentum") return Role::momentum;
    if (name == "bias_only") return Role::bias_only;
    throw ConfigError("unknown model role '" + name + "'");
}

namespace {

Linear init_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Linear l{ad::Tensor({in, out}), ad::Tensor({1, out}, 0.0)};
    for (double& w : l.weight.values()) w = dist(rng);
    return l;
}

void affine_inplace(const ad::Tensor& x, const Linear& l, ad::Tensor& out) {
    const std::size_t n = x.rows(), in = x.cols(), o = l.weight.cols();
    out = ad::Tensor({n, o});
    ad::kernels::gemm(x.values(), l.weight.values(), out.values(), n, in, o);
    for (std::size_t i = 0; i < n; ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < o; ++j) r[j] += l.bias.values()[j];
    }
}

}  // namespace

Model::Model(EncoderConfig config, std::size_t num_classes, Role role)
    : config_(std::move(config)), num_classes_(num_classes), role_(role) {
    config_.validate();
    if (num_classes_ < 2) throw ConfigError("model needs at least 2 classes");
    std::mt19937_64 rng(config_.init_seed);
    std::size_t in = config_.input_dim;
    for (std::size_t h : config_.hidden_dims) {
        encoder_.push_back(init_linear(in, h, rng));
        in = h;
    }
    encoder_.push_back(init_linear(in, config_.repr_dim, rng));
    head_ = init_linear(config_.repr_dim, num_classes_, rng);
}

std::vector<ad::Tensor*> Model::parameters() {
    std::vector<ad::Tensor*> out;
    for (Linear& l : encoder_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

std::vector<const ad::Tensor*> Model::parameters() const {
    std::vector<const ad::Tensor*> out;
    for (const Linear& l : encoder_) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&head_.weight);
    out.push_back(&head_.bias);
    return out;
}

std::vector<std::string> Model::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        out.push_back("encoder." + std::to_string(i) + ".weight");
        out.push_back("encoder." + std::to_string(i) + ".bias");
    }
    out.push_back("head.weight");
    out.push_back("head.bias");
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const ad::Tensor* p : parameters()) n += p->numel();
    return n;
}

std::vector<ad::Tensor*> Model::trainable_parameters() {
    if (role_ == Role::momentum) throw ContractError("momentum-role models are not trained by gradient");
    return parameters();
}

void Model::zero_grad() {
    for (ad::Tensor* p : parameters()) p->zero_grad();
}

bool Model::same_architecture(const Model& other) const {
    if (num_classes_ != other.num_classes_ || encoder_.size() != other.encoder_.size()) return false;
    const auto a = parameters();
    const auto b = other.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]->shape() != b[i]->shape()) return false;
    }
    return true;
}

BoundModel bind(ad::Tape& tape, Model& model) {
    const bool frozen = model.role() == Role::momentum;
    auto leaf = [&](ad::Tensor& t) { return frozen ? tape.constant(t) : tape.parameter(t); };
    BoundModel b;
    for (Linear& l : model.encoder()) b.encoder.emplace_back(leaf(l.weight), leaf(l.bias));
    b.head = {leaf(model.head().weight), leaf(model.head().bias)};
    return b;
}

ad::Var encode(const BoundModel& model, ad::Var features) {
    const std::size_t in = model.encoder.front().first.value().rows();
    if (features.value().rank() != 2 || features.value().cols() != in) {
        throw DimensionError("encode: features " + ad::shape_to_string(features.shape()) +
                             " do not match input_dim " + std::to_string(in));
    }
    ad::Var h = features;
    for (std::size_t i = 0; i < model.encoder.size(); ++i) {
        h = ad::add_row_bias(ad::matmul(h, model.encoder[i].first), model.encoder[i].second);
        if (i + 1 < model.encoder.size()) h = ad::tanh(h);
    }
    return ad::l2_normalize(h);
}

ad::Var classify(const BoundModel& model, ad::Var representations) {
    const std::size_t in = model.head.first.value().rows();
    if (representations.value().rank() != 2 || representations.value().cols() != in) {
        throw DimensionError("classify: representations " + ad::shape_to_string(representations.shape()) +
                             " do not match repr_dim " + std::to_string(in));
    }
    return ad::add_row_bias(ad::matmul(representations, model.head.first), model.head.second);
}

ad::Tensor encode(const Model& model, const ad::Tensor& features) {
    if (features.rank() != 2 || features.cols() != model.config().input_dim) {
        throw DimensionError("encode: features " + ad::shape_to_string(features.shape()) +
                             " do not match input_dim " + std::to_string(model.config().input_dim));
    }
    ad::Tensor h = features;
    ad::Tensor next;
    const auto& layers = model.encoder();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        affine_inplace(h, layers[i], next);
        if (i + 1 < layers.size()) {
            for (double& v : next.values()) v = std::tanh(v);
        }
        std::swap(h, next);
    }
    ad::l2_normalize_rows_inplace(h);
    return h;
}

ad::Tensor encode_batched(const Model& model, const ad::Tensor& features, std::size_t block) {
    const std::size_t n = features.rows(), d = features.cols();
    ad::Tensor out({n, model.config().repr_dim});
    for (std::size_t start = 0; start < n; start += block) {
        const std::size_t len = std::min(block, n - start);
        ad::Tensor chunk({len, d}, std::vector<double>(features.values().begin() + static_cast<std::ptrdiff_t>(start * d),
                                                       features.values().begin() + static_cast<std::ptrdiff_t>((start + len) * d)));
        ad::Tensor enc = encode(model, chunk);
        std::copy(enc.values().begin(), enc.values().end(), out.row(start).begin());
    }
    return out;
}

ad::Tensor classify(const Model& model, const ad::Tensor& representations) {
    if (representations.rank() != 2 || representations.cols() != model.config().repr_dim) {
        throw DimensionError("classify: representations " + ad::shape_to_string(representations.shape()) +
                             " do not match repr_dim " + std::to_string(model.config().repr_dim));
    }
    ad::Tensor out;
    affine_inplace(representations, model.head(), out);
    return out;
}

void momentum_update(Model& momentum_model, const Model& debias_model, double m, MomentumConvention convention) {
    if (!(m >= 0.0 && m < 1.0)) throw ConfigError("momentum coefficient must lie in [0,1)");
    if (!momentum_model.same_architecture(debias_model)) {
        throw ContractError("momentum_update: architectures differ");
    }
    auto dst = momentum_model.parameters();
    auto src = debias_model.parameters();
    const double keep = convention == MomentumConvention::standard ? m : 1.0 - m;
    for (std::size_t i = 0; i < dst.size(); ++i) {
        auto d = dst[i]->values();
        auto s = src[i]->values();
        for (std::size_t j = 0; j < d.size(); ++j) {
            if (d[j] != s[j]) d[j] = keep * d[j] + (1.0 - keep) * s[j];
        }
    }
}

void CheckpointStore::save(std::size_t epoch, const Model& model) {
    if (epoch != frozen_.size()) {
        throw ContractError("checkpoint epochs must be contiguous: expected " + std::to_string(frozen_.size()) +
                            ", got " + std::to_string(epoch));
    }
    auto copy = std::make_shared<Model>(model);
    for (ad::Tensor* p : copy->parameters()) *p = ad::Tensor(p->shape(), p->data());
    frozen_.push_back(std::move(copy));
}

std::shared_ptr<const Model> CheckpointStore::load(std::size_t epoch) const {
    if (epoch >= frozen_.size()) {
        throw LookupError("no checkpoint for epoch " + std::to_string(epoch) + " (store holds " +
                          std::to_string(frozen_.size()) + ")");
    }
    return frozen_[epoch];
}

void write_checkpoint(const std::filesystem::path& path, const Model& model) {
    nlohmann::json doc;
    doc["role"] = role_name(model.role());
    doc["num_classes"] = model.num_classes();
    doc["config"] = {{"input_dim", model.config().input_dim},
                     {"hidden_dims", model.config().hidden_dims},
                     {"repr_dim", model.config().repr_dim},
                     {"init_seed", model.config().init_seed}};
    const auto names = model.parameter_names();
    const auto params = model.parameters();
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        arr.push_back({{"name", names[i]}, {"shape", params[i]->shape()}, {"values", params[i]->data()}});
    }
    doc["parameters"] = std::move(arr);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << doc.dump() << '\n';
}

Model read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LookupError("checkpoint file not found: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(1, std::string("checkpoint: ") + e.what());
    }
    EncoderConfig cfg;
    cfg.input_dim = doc.at("config").at("input_dim").get<std::size_t>();
    cfg.hidden_dims = doc.at("config").at("hidden_dims").get<std::vector<std::size_t>>();
    cfg.repr_dim = doc.at("config").at("repr_dim").get<std::size_t>();
    cfg.init_seed = doc.at("config").at("init_seed").get<std::uint64_t>();
    Model model(cfg, doc.at("num_classes").get<std::size_t>(), role_from_name(doc.at("role").get<std::string>()));
    const auto names = model.parameter_names();
    auto params = model.parameters();
    const auto& arr = doc.at("parameters");
    if (arr.size() != params.size()) throw SchemaError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (arr[i].at("name").get<std::string>() != names[i]) {
            throw SchemaError("checkpoint: expected parameter " + names[i]);
        }
        ad::Tensor t(arr[i].at("shape").get<ad::Shape>(), arr[i].at("values").get<std::vector<double>>());
        if (t.shape() != params[i]->shape()) throw SchemaError("checkpoint: shape mismatch for " + names[i]);
        *params[i] = std::move(t);
    }
    return model;
}

}  // namespace debiaslab::models
