#include "debiaslab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"

#include "debiaslab/errors.hpp"

namespace debiaslab::data {

void GeneratorConfig::validate() const {
    if (num_classes < 2) throw ConfigError("generator: num_classes must be >= 2");
    if (task_dim < 1 || bias_dim < 1) throw ConfigError("generator: feature block widths must be >= 1");
    for (double rho : {rho_train, rho_ood}) {
        if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("generator: rho must lie in [0,1]");
    }
    for (std::size_t n : {n_train, n_dev, n_ood}) {
        if (n < num_classes) throw ConfigError("generator: every split needs at least num_classes samples");
    }
    if (!(sigma_task > 0.0) || !(sigma_bias > 0.0)) throw ConfigError("generator: noise scales must be > 0");
    if (!(task_separation >= 4.0)) throw ConfigError("generator: task_separation must be >= 4 sigma_task");
    if (!(bias_separation > 0.0)) throw ConfigError("generator: bias_separation must be > 0");
    if (task_dim + 1 < num_classes || bias_dim + 1 < num_classes) {
        throw ConfigError("generator: " + std::to_string(num_classes) +
                          " separated prototypes need at least " + std::to_string(num_classes - 1) +
                          " dimensions per block");
    }
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::id_dev: return "id_dev";
        case Split::ood: return "ood";
    }
    return "train";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "id_dev") return Split::id_dev;
    if (name == "ood") return Split::ood;
    throw ConfigError("unknown split '" + name + "'");
}

std::size_t Dataset::feature_dim() const { return samples.empty() ? 0 : samples.front().features.size(); }

std::size_t Dataset::num_classes() const {
    int mx = -1;
    for (const Sample& s : samples) mx = std::max(mx, s.label);
    return static_cast<std::size_t>(mx + 1);
}

ad::Tensor Dataset::features() const {
    const std::size_t d = feature_dim();
    ad::Tensor out({samples.size(), d});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::copy(samples[i].features.begin(), samples[i].features.end(), out.row(i).begin());
    }
    return out;
}

ad::Tensor Dataset::features(std::span<const std::size_t> rows) const {
    const std::size_t d = feature_dim();
    ad::Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& f = samples.at(rows[i]).features;
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const Sample& s : samples) out.push_back(s.label);
    return out;
}

std::unordered_map<SampleId, std::size_t> Dataset::index_by_id() const {
    std::unordered_map<SampleId, std::size_t> index;
    index.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!index.emplace(samples[i].id, i).second) {
            throw SchemaError("duplicate sample id " + std::to_string(samples[i].id));
        }
    }
    return index;
}

ad::Tensor simplex_prototypes(std::size_t num_classes, std::size_t dim, double pairwise_distance) {
    if (num_classes < 2 || dim + 1 < num_classes) {
        throw ConfigError("cannot place " + std::to_string(num_classes) + " equidistant prototypes in " +
                          std::to_string(dim) + " dimensions");
    }
    // Helmert basis of the sum-zero subspace: the images of the standard basis
    // vectors are a regular simplex with edge √2.
    const double scale = pairwise_distance / std::sqrt(2.0);
    ad::Tensor protos({num_classes, dim}, 0.0);
    for (std::size_t j = 1; j < num_classes; ++j) {
        const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
        for (std::size_t c = 0; c < num_classes; ++c) {
            double h = 0.0;
            if (c < j) h = 1.0 / norm;
            else if (c == j) h = -static_cast<double>(j) / norm;
            protos(c, j - 1) = h * scale;
        }
    }
    return protos;
}

namespace {

Dataset draw_split(const GeneratorConfig& cfg, Split split, std::size_t n, double rho, SampleId first_id,
                   const ad::Tensor& task_protos, const ad::Tensor& bias_protos) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(split) + 1u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution aligned_draw(rho);
    std::uniform_int_distribution<std::size_t> other_class(0, cfg.num_classes - 2);

    const std::size_t K = cfg.num_classes;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % K);
    std::shuffle(labels.begin(), labels.end(), rng);

    Dataset ds;
    ds.split = split;
    ds.provenance = "generated:seed=" + std::to_string(cfg.seed);
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Sample s;
        s.id = first_id + static_cast<SampleId>(i);
        s.origin = s.id;
        s.label = labels[i];
        const auto y = static_cast<std::size_t>(s.label);
        s.bias_aligned = aligned_draw(rng);
        std::size_t bias_class = y;
        if (!s.bias_aligned) {
            bias_class = other_class(rng);
            if (bias_class >= y) ++bias_class;
        }
        s.features.resize(cfg.task_dim + cfg.bias_dim);
        for (std::size_t d = 0; d < cfg.task_dim; ++d) {
            s.features[d] = task_protos(y, d) + cfg.sigma_task * gauss(rng);
        }
        for (std::size_t d = 0; d < cfg.bias_dim; ++d) {
            s.features[cfg.task_dim + d] = bias_protos(bias_class, d) + cfg.sigma_bias * gauss(rng);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

GeneratedData generate(const GeneratorConfig& config) {
    config.validate();
    const ad::Tensor task = simplex_prototypes(config.num_classes, config.task_dim,
                                               config.task_separation * config.sigma_task);
    const ad::Tensor bias = simplex_prototypes(config.num_classes, config.bias_dim,
                                               config.bias_separation * config.sigma_bias);
    GeneratedData out;
    SampleId next = 0;
    out.train = draw_split(config, Split::train, config.n_train, config.rho_train, next, task, bias);
    next += static_cast<SampleId>(config.n_train);
    out.id_dev = draw_split(config, Split::id_dev, config.n_dev, config.rho_train, next, task, bias);
    next += static_cast<SampleId>(config.n_dev);
    out.ood = draw_split(config, Split::ood, config.n_ood, config.rho_ood, next, task, bias);
    return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const Sample& s : dataset.samples) {
        nlohmann::json rec = {
            {"id", s.id}, {"features", s.features}, {"label", s.label}, {"bias_aligned", s.bias_aligned}};
        if (s.origin != s.id) rec["origin"] = s.origin;
        out << rec.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Dataset ds;
    ds.split = split;
    ds.provenance = path.string();
    std::string line;
    std::size_t lineno = 0;
    std::unordered_map<SampleId, std::size_t> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) throw ParseError(lineno, "record is not an object");
        for (const char* field : {"id", "features", "label", "bias_aligned"}) {
            if (!rec.contains(field)) throw ParseError(lineno, std::string("missing field \"") + field + "\"");
        }
        Sample s;
        try {
            s.id = rec.at("id").get<SampleId>();
            s.features = rec.at("features").get<std::vector<double>>();
            s.label = rec.at("label").get<int>();
            s.bias_aligned = rec.at("bias_aligned").get<bool>();
            s.origin = rec.contains("origin") ? rec.at("origin").get<SampleId>() : s.id;
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, std::string("bad field type: ") + e.what());
        }
        if (s.label < 0) throw ParseError(lineno, "negative label");
        if (!ds.samples.empty() && s.features.size() != ds.samples.front().features.size()) {
            throw SchemaError("line " + std::to_string(lineno) + ": feature length " +
                              std::to_string(s.features.size()) + " differs from " +
                              std::to_string(ds.samples.front().features.size()));
        }
        if (!seen.emplace(s.id, ds.samples.size()).second) {
            throw SchemaError("line " + std::to_string(lineno) + ": duplicate id " + std::to_string(s.id));
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

double measure_alignment(const Dataset& dataset) {
    if (dataset.empty()) throw ContractError("measure_alignment: empty dataset");
    const auto aligned = std::count_if(dataset.samples.begin(), dataset.samples.end(),
                                       [](const Sample& s) { return s.bias_aligned; });
    return static_cast<double>(aligned) / static_cast<double>(dataset.size());
}

}  // namespace debiaslab::data
