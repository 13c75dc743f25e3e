// debias_lab: command-line front end for the two-stage debiasing pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "debiaslab/errors.hpp"
#include "debiaslab/harness/config.hpp"
#include "debiaslab/harness/pipeline.hpp"
#include "debiaslab/harness/report.hpp"

namespace fs = std::filesystem;
using namespace debiaslab;
using harness::ExperimentConfig;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "INI config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "master seed (DEBIAS_LAB_SEED takes precedence)");
    cmd->add_option("--set", opts.overrides, "override, e.g. --set dct.lambda=0.7")->take_all();
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + text + "'");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

ExperimentConfig resolve(const CommonOptions& opts) {
    ExperimentConfig cfg = opts.config_path.empty() ? ExperimentConfig{} : harness::load_config(opts.config_path);
    for (const auto& o : opts.overrides) {
        auto [k, v] = split_assignment(o);
        cfg.set(k, v);
    }
    if (opts.seed) cfg.seed = *opts.seed;
    harness::apply_seed_env(cfg);
    cfg.validate();
    return cfg;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int cmd_generate(const CommonOptions& opts, const std::string& out_dir) {
    const auto cfg = resolve(opts);
    const fs::path dir = out_dir.empty() ? harness::run_directory(cfg) / "data" : fs::path(out_dir);
    fs::create_directories(dir);
    const auto data = harness::generate_data(cfg);
    data::write_dataset(dir / "train.jsonl", data.train);
    data::write_dataset(dir / "id_dev.jsonl", data.id_dev);
    data::write_dataset(dir / "ood.jsonl", data.ood);
    std::cout << dir.string() << "\n";
    std::cout << "train " << data.train.size() << " (alignment " << data::measure_alignment(data.train) << "), id_dev "
              << data.id_dev.size() << ", ood " << data.ood.size() << " (alignment "
              << data::measure_alignment(data.ood) << ")\n";
    return 0;
}

int cmd_train_bias(const CommonOptions& opts) {
    const auto cfg = resolve(opts);
    const fs::path dir = harness::run_directory(cfg);
    fs::create_directories(dir / "bias_checkpoints");
    const auto data = harness::generate_data(cfg);
    const auto bias = harness::train_bias_only(cfg, data.train);
    for (std::size_t e = 0; e < bias.checkpoints.size(); ++e) {
        models::write_checkpoint(dir / "bias_checkpoints" / ("epoch_" + std::to_string(e) + ".json"),
                                 *bias.checkpoints.load(e));
    }
    const auto debias = sampling::filter_debias(data.train, bias.profile, cfg.lambda, cfg.filter_source);
    sampling::write_debias_ids(dir / "debias_ids.txt", debias);
    nlohmann::ordered_json j{{"run_dir", dir.string()},
                             {"train_accuracy", bias.train_accuracy},
                             {"id_accuracy", harness::evaluate(bias.model, data.id_dev)},
                             {"ood_accuracy", harness::evaluate(bias.model, data.ood)},
                             {"epoch_loss", bias.epoch_loss},
                             {"debias_set_size", debias.size()}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_train(const CommonOptions& opts) {
    const auto cfg = resolve(opts);
    harness::RunReport report;
    const auto dir = harness::run_experiment(cfg, &report);
    std::cout << dir.string() << "\n" << harness::summary_header() << harness::summary_row(report, cfg);
    return 0;
}

std::vector<fs::path> checkpoint_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (std::size_t e = 0;; ++e) {
        const auto f = dir / ("epoch_" + std::to_string(e) + ".json");
        if (!fs::exists(f)) break;
        files.push_back(f);
    }
    return files;
}

int cmd_probe(const CommonOptions& opts) {
    const auto cfg = resolve(opts);
    const fs::path dir = harness::run_directory(cfg);
    const auto files = checkpoint_files(dir / "checkpoints");
    if (files.empty()) throw LookupError("no checkpoints under " + (dir / "checkpoints").string() + "; run train first");
    models::CheckpointStore store;
    for (std::size_t e = 0; e < files.size(); ++e) store.save(e, models::read_checkpoint(files[e]));
    const auto data = harness::generate_data(cfg);
    const auto probe_set = harness::build_probe_set(data, cfg.probe_size);
    const auto pcfg = harness::probe_config(cfg);
    std::string out;
    for (const auto& r : probing::probe_checkpoints(store, probe_set, pcfg)) out += probing::to_json(r, pcfg).dump() + "\n";
    write_file(dir / "probes.jsonl", out);
    std::cout << out;
    return 0;
}

int cmd_evaluate(const CommonOptions& opts, const std::string& checkpoint) {
    const auto cfg = resolve(opts);
    fs::path file = checkpoint;
    if (file.empty()) {
        const auto files = checkpoint_files(harness::run_directory(cfg) / "checkpoints");
        if (files.empty()) throw LookupError("no checkpoints for this config; run train first or pass --checkpoint");
        file = files.back();
    }
    const auto model = models::read_checkpoint(file);
    const auto data = harness::generate_data(cfg);
    nlohmann::ordered_json j{{"checkpoint", file.string()},
                             {"id_accuracy", harness::evaluate(model, data.id_dev)},
                             {"ood_accuracy", harness::evaluate(model, data.ood)}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const CommonOptions& opts, const std::vector<std::string>& grid) {
    const auto base = resolve(opts);
    std::vector<ExperimentConfig> configs{base};
    for (const auto& g : grid) {
        auto [key, values] = split_assignment(g);
        std::vector<ExperimentConfig> next;
        for (const auto& c : configs) {
            for (const auto& v : split_list(values)) {
                ExperimentConfig copy = c;
                copy.set(key, v);
                copy.validate();
                next.push_back(copy);
            }
        }
        configs = std::move(next);
    }
    std::cout << harness::summary_header();
    for (const auto& c : configs) {
        harness::RunReport report;
        harness::run_experiment(c, &report);
        std::cout << harness::summary_row(report, c) << std::flush;
    }
    return 0;
}

int cmd_report(const CommonOptions& opts, const std::string& root, const std::string& out) {
    fs::path dir = root;
    if (dir.empty()) dir = resolve(opts).output_root;
    const auto text = harness::aggregate_summaries(dir);
    if (out.empty()) std::cout << text;
    else write_file(out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic-data lab for contrastive debiasing and bias-extractability probing"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string out_dir, checkpoint, root, report_out;
    std::vector<std::string> grid;

    auto* generate = app.add_subcommand("generate", "write train/id_dev/ood splits as JSONL");
    add_common(generate, opts);
    generate->add_option("--out", out_dir, "output directory (default <run dir>/data)");

    auto* train_bias = app.add_subcommand("train-bias", "train the bias-only model and write the debias id list");
    add_common(train_bias, opts);

    auto* train = app.add_subcommand("train", "run the full pipeline and write reports");
    add_common(train, opts);

    auto* probe = app.add_subcommand("probe", "MDL-probe the saved checkpoints of a run");
    add_common(probe, opts);

    auto* evaluate = app.add_subcommand("evaluate", "ID and OOD accuracy of a checkpoint");
    add_common(evaluate, opts);
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file (default: last epoch of the run)");

    auto* sweep = app.add_subcommand("sweep", "grid over config keys, one run per point");
    add_common(sweep, opts);
    sweep->add_option("--grid", grid, "key=v1,v2,... (repeatable; cartesian product)")->required();

    auto* report = app.add_subcommand("report", "concatenate summary rows of all runs");
    add_common(report, opts);
    report->add_option("--root", root, "directory holding run directories (default output_root)");
    report->add_option("--out", report_out, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) return cmd_generate(opts, out_dir);
        if (*train_bias) return cmd_train_bias(opts);
        if (*train) return cmd_train(opts);
        if (*probe) return cmd_probe(opts);
        if (*evaluate) return cmd_evaluate(opts, checkpoint);
        if (*sweep) return cmd_sweep(opts, grid);
        if (*report) return cmd_report(opts, root, report_out);
    } catch (const ParseError& e) {
        std::cerr << "error: line " << e.line() << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
