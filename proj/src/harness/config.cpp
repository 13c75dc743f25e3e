#include "debiaslab/harness/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "debiaslab/errors.hpp"

namespace debiaslab::harness {

const char* method_name(Method m) {
    switch (m) {
        case Method::ce: return "ce";
        case Method::reweight: return "reweight";
        case Method::poe: return "poe";
        case Method::conf_reg: return "conf_reg";
        case Method::dct: return "dct";
    }
    return "ce";
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::ce, Method::reweight, Method::poe, Method::conf_reg, Method::dct}) {
        if (name == method_name(m)) return m;
    }
    throw ConfigError("unknown method '" + name + "' (expected ce|reweight|poe|conf_reg|dct)");
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b == std::string::npos) continue;
        out.push_back(static_cast<std::size_t>(parse_uint(key, item.substr(b, e - b + 1))));
    }
    return out;
}

std::string fmt_dims(const std::vector<std::size_t>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(dims[i]);
    }
    return out;
}

struct Field {
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field size_field(T ExperimentConfig::*member) {
    return {[member](const ExperimentConfig& c) { return std::to_string(c.*member); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.*member = static_cast<T>(parse_uint(k, v));
            }};
}

Field double_field(double ExperimentConfig::*member) {
    return {[member](const ExperimentConfig& c) { return fmt_double(c.*member); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); }};
}

Field bool_field(bool ExperimentConfig::*member) {
    return {[member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); }};
}

template <typename T>
Field gen_size(T data::GeneratorConfig::*member) {
    return {[member](const ExperimentConfig& c) { return std::to_string(c.generator.*member); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.generator.*member = static_cast<T>(parse_uint(k, v));
            }};
}

Field gen_double(double data::GeneratorConfig::*member) {
    return {[member](const ExperimentConfig& c) { return fmt_double(c.generator.*member); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
                c.generator.*member = parse_double(k, v);
            }};
}

Field dims_field(std::vector<std::size_t> ExperimentConfig::*member) {
    return {[member](const ExperimentConfig& c) { return fmt_dims(c.*member); },
            [member](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*member = parse_dims(k, v); }};
}

const std::vector<std::pair<std::string, Field>>& registry() {
    static const std::vector<std::pair<std::string, Field>> fields = [] {
        std::vector<std::pair<std::string, Field>> f;
        f.emplace_back("experiment.method",
                       Field{[](const ExperimentConfig& c) { return std::string(method_name(c.method)); },
                             [](ExperimentConfig& c, const std::string&, const std::string& v) {
                                 c.method = method_from_name(v);
                             }});
        f.emplace_back("experiment.preset",
                       Field{[](const ExperimentConfig& c) { return c.preset; },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "paper-bert") {
                                     c.learning_rate = 3e-5;
                                     c.tau = 0.04;
                                 } else if (v == "desk") {
                                     c.learning_rate = 1e-3;
                                     c.tau = 0.2;
                                 } else {
                                     throw ConfigError(k + ": unknown preset '" + v + "' (desk|paper-bert)");
                                 }
                                 c.preset = v;
                             }});
        f.emplace_back("experiment.seed", size_field(&ExperimentConfig::seed));
        f.emplace_back("experiment.epochs", size_field(&ExperimentConfig::epochs));
        f.emplace_back("experiment.batch_size", size_field(&ExperimentConfig::batch_size));
        f.emplace_back("experiment.learning_rate", double_field(&ExperimentConfig::learning_rate));
        f.emplace_back("experiment.weight_decay", double_field(&ExperimentConfig::weight_decay));
        f.emplace_back("experiment.output_root",
                       Field{[](const ExperimentConfig& c) { return c.output_root.string(); },
                             [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output_root = v; }});

        f.emplace_back("data.num_classes", gen_size(&data::GeneratorConfig::num_classes));
        f.emplace_back("data.n_train", gen_size(&data::GeneratorConfig::n_train));
        f.emplace_back("data.n_dev", gen_size(&data::GeneratorConfig::n_dev));
        f.emplace_back("data.n_ood", gen_size(&data::GeneratorConfig::n_ood));
        f.emplace_back("data.task_dim", gen_size(&data::GeneratorConfig::task_dim));
        f.emplace_back("data.bias_dim", gen_size(&data::GeneratorConfig::bias_dim));
        f.emplace_back("data.rho_train", gen_double(&data::GeneratorConfig::rho_train));
        f.emplace_back("data.rho_ood", gen_double(&data::GeneratorConfig::rho_ood));
        f.emplace_back("data.sigma_task", gen_double(&data::GeneratorConfig::sigma_task));
        f.emplace_back("data.sigma_bias", gen_double(&data::GeneratorConfig::sigma_bias));
        f.emplace_back("data.task_separation", gen_double(&data::GeneratorConfig::task_separation));
        f.emplace_back("data.bias_separation", gen_double(&data::GeneratorConfig::bias_separation));

        f.emplace_back("model.debias_hidden", dims_field(&ExperimentConfig::debias_hidden));
        f.emplace_back("model.debias_repr", size_field(&ExperimentConfig::debias_repr));
        f.emplace_back("model.bias_hidden", dims_field(&ExperimentConfig::bias_hidden));
        f.emplace_back("model.bias_repr", size_field(&ExperimentConfig::bias_repr));
        f.emplace_back("model.bias_epochs", size_field(&ExperimentConfig::bias_epochs));
        f.emplace_back("model.bias_learning_rate", double_field(&ExperimentConfig::bias_learning_rate));

        f.emplace_back("dct.tau", double_field(&ExperimentConfig::tau));
        f.emplace_back("dct.lambda", double_field(&ExperimentConfig::lambda));
        f.emplace_back("dct.momentum", double_field(&ExperimentConfig::momentum));
        f.emplace_back("dct.alpha", double_field(&ExperimentConfig::alpha));
        f.emplace_back("dct.positives", size_field(&ExperimentConfig::positives));
        f.emplace_back("dct.dynamic_negatives", size_field(&ExperimentConfig::dynamic_negatives));
        f.emplace_back("dct.queue_capacity", size_field(&ExperimentConfig::queue_capacity));
        f.emplace_back("dct.warmup_fraction", double_field(&ExperimentConfig::warmup_fraction));

        f.emplace_back("ablation.disable_debias_positives", bool_field(&ExperimentConfig::disable_debias_positives));
        f.emplace_back("ablation.disable_dynamic_negatives", bool_field(&ExperimentConfig::disable_dynamic_negatives));
        f.emplace_back("ablation.positive_space",
                       Field{[](const ExperimentConfig& c) {
                                 return std::string(c.positive_space == PositiveSpace::bias_encoder ? "bias_encoder"
                                                                                                     : "debias_encoder");
                             },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "bias_encoder") c.positive_space = PositiveSpace::bias_encoder;
                                 else if (v == "debias_encoder") c.positive_space = PositiveSpace::debias_encoder;
                                 else throw ConfigError(k + ": expected bias_encoder|debias_encoder");
                             }});
        f.emplace_back("ablation.positive_schedule",
                       Field{[](const ExperimentConfig& c) {
                                 return std::string(c.positive_schedule == PositiveSchedule::per_epoch ? "per_epoch"
                                                                                                        : "static_final");
                             },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "per_epoch") c.positive_schedule = PositiveSchedule::per_epoch;
                                 else if (v == "static_final") c.positive_schedule = PositiveSchedule::static_final;
                                 else throw ConfigError(k + ": expected per_epoch|static_final");
                             }});
        f.emplace_back("ablation.positives_same_label", bool_field(&ExperimentConfig::positives_same_label));
        f.emplace_back("ablation.denominator",
                       Field{[](const ExperimentConfig& c) {
                                 return std::string(c.denominator == contrastive::Denominator::negatives_only
                                                        ? "negatives_only"
                                                        : "with_positive");
                             },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "negatives_only") c.denominator = contrastive::Denominator::negatives_only;
                                 else if (v == "with_positive") c.denominator = contrastive::Denominator::with_positive;
                                 else throw ConfigError(k + ": expected negatives_only|with_positive");
                             }});
        f.emplace_back("ablation.momentum_convention",
                       Field{[](const ExperimentConfig& c) {
                                 return std::string(c.momentum_convention == models::MomentumConvention::standard
                                                        ? "standard"
                                                        : "swapped");
                             },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "standard") c.momentum_convention = models::MomentumConvention::standard;
                                 else if (v == "swapped") c.momentum_convention = models::MomentumConvention::swapped;
                                 else throw ConfigError(k + ": expected standard|swapped, got '" + v + "'");
                             }});
        f.emplace_back("ablation.filter_source",
                       Field{[](const ExperimentConfig& c) {
                                 return std::string(c.filter_source == sampling::FilterSource::final_epoch ? "final_epoch"
                                                                                                           : "any_epoch");
                             },
                             [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                 if (v == "final_epoch") c.filter_source = sampling::FilterSource::final_epoch;
                                 else if (v == "any_epoch") c.filter_source = sampling::FilterSource::any_epoch;
                                 else throw ConfigError(k + ": expected final_epoch|any_epoch");
                             }});
        f.emplace_back("ablation.ce_on_augmented", bool_field(&ExperimentConfig::ce_on_augmented));

        f.emplace_back("probe.enabled", bool_field(&ExperimentConfig::probe));
        f.emplace_back("probe.size", size_field(&ExperimentConfig::probe_size));
        f.emplace_back("probe.steps", size_field(&ExperimentConfig::probe_steps));
        f.emplace_back("probe.learning_rate", double_field(&ExperimentConfig::probe_learning_rate));
        f.emplace_back("probe.weight_decay", double_field(&ExperimentConfig::probe_weight_decay));
        f.emplace_back("probe.split", double_field(&ExperimentConfig::probe_split));
        return f;
    }();
    return fields;
}

const Field& field(const std::string& key) {
    for (const auto& [k, f] : registry()) {
        if (k == key) return f;
    }
    throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, key, value); }

std::string ExperimentConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& [key, f] : registry()) out.push_back(key);
        return out;
    }();
    return k;
}

void ExperimentConfig::validate() const {
    data::GeneratorConfig g = generator;
    g.validate();
    if (epochs < 1 || bias_epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !(bias_learning_rate > 0.0)) throw ConfigError("learning rates must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("dct.tau must be > 0");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("dct.lambda must lie in [0,1]");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("dct.momentum must lie in [0,1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("dct.alpha must lie in [0,1]");
    if (positives < 1) throw ConfigError("dct.positives must be >= 1");
    if (queue_capacity < 1) throw ConfigError("dct.queue_capacity must be >= 1");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("dct.warmup_fraction must lie in [0,1]");
    if (debias_repr < 1 || bias_repr < 1) throw ConfigError("representation widths must be >= 1");
    for (const auto* dims : {&debias_hidden, &bias_hidden}) {
        for (std::size_t d : *dims) {
            if (d < 1) throw ConfigError("hidden widths must be >= 1");
        }
    }
    if (probe && probe_size < 8) throw ConfigError("probe.size must be >= 8");
    if (!(probe_split > 0.0 && probe_split < 1.0)) throw ConfigError("probe.split must lie in (0,1)");
}

std::string ExperimentConfig::to_ini() const {
    std::string out;
    std::string section;
    for (const auto& [key, f] : registry()) {
        const auto dot = key.find('.');
        const std::string sec = key.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += key.substr(dot + 1) + " = " + f.get(*this) + "\n";
    }
    return out;
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
    for (const auto& [key, f] : registry()) {
        if (key == "experiment.output_root") continue;
        for (char ch : key + "=" + f.get(*this) + "\n") {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool ExperimentConfig::needs_bias_model() const {
    switch (method) {
        case Method::ce: return ce_on_augmented;
        case Method::reweight:
        case Method::poe:
        case Method::conf_reg: return true;
        case Method::dct: return !(disable_debias_positives && disable_dynamic_negatives);
    }
    return true;
}

bool ExperimentConfig::uses_augmented_train() const {
    if (method == Method::ce) return ce_on_augmented;
    return method == Method::dct && !disable_debias_positives;
}

std::uint64_t derive_seed(std::uint64_t master, const std::string& stream) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
    for (char ch : stream) words.push_back(static_cast<unsigned char>(ch));
    std::seed_seq seq(words.begin(), words.end());
    std::mt19937_64 rng(seq);
    return rng();
}

ExperimentConfig parse_config(const std::string& ini_text) {
    boost::property_tree::ptree tree;
    std::istringstream in(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ParseError(e.line(), e.message());
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("top-level key '" + section + "' outside a section");
        for (const auto& [key, value] : body) entries.emplace_back(section + "." + key, value.data());
    }
    ExperimentConfig cfg;
    // The preset sets defaults that explicit keys may override.
    for (const auto& [k, v] : entries) {
        if (k == "experiment.preset") cfg.set(k, v);
    }
    for (const auto& [k, v] : entries) {
        if (k != "experiment.preset") cfg.set(k, v);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

bool apply_seed_env(ExperimentConfig& config) {
    const char* env = std::getenv("DEBIAS_LAB_SEED");
    if (env == nullptr || *env == '\0') return false;
    config.set("experiment.seed", env);
    return true;
}

}  // namespace debiaslab::harness
