#include "debiaslab/harness/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "debiaslab/errors.hpp"
#include "json.hpp"

namespace debiaslab::harness {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string metrics_jsonl(const RunReport& report, const ExperimentConfig& config) {
    std::string out;
    const auto pcfg = probe_config(config);
    for (const auto& e : report.epochs) {
        nlohmann::ordered_json j;
        j["config_hash"] = report.config_hash;
        j["method"] = method_name(report.method);
        j["seed"] = report.seed;
        j["epoch"] = e.epoch;
        j["train_loss"] = e.train_loss;
        j["ce_loss"] = e.ce_loss;
        j["id_accuracy"] = e.id_accuracy;
        j["ood_accuracy"] = e.ood_accuracy;
        j["batches"] = e.batches;
        if (report.method == Method::dct) {
            j["dct_loss"] = e.dct_loss ? nlohmann::ordered_json(*e.dct_loss) : nlohmann::ordered_json(nullptr);
            j["warmup_batches"] = e.warmup_batches;
            j["dct_anchors"] = e.dct_anchors;
            j["starved_positive"] = e.starved_positive;
            j["starved_negative"] = e.starved_negative;
            j["ablation"] = {{"disable_debias_positives", config.disable_debias_positives},
                             {"disable_dynamic_negatives", config.disable_dynamic_negatives}};
        }
        if (report.debias_set_size) j["debias_set_size"] = *report.debias_set_size;
        if (report.queue) {
            j["queue"] = {{"batches", report.queue->batches},
                          {"pushes", report.queue->pushes},
                          {"evictions", report.queue->evictions},
                          {"size", report.queue->final_size}};
        }
        if (report.poe_clamped) j["poe_clamped"] = *report.poe_clamped;
        if (e.probe) j["probe"] = probing::to_json(*e.probe, pcfg);
        out += j.dump() + "\n";
    }
    return out;
}

const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{
        "config_hash",      "method",          "seed",          "epochs",
        "lambda",           "alpha",           "tau",           "disable_debias_positives",
        "disable_dynamic_negatives", "train_size", "id_accuracy", "ood_accuracy",
        "final_train_loss", "debias_set_size", "queue_pushes",  "queue_evictions",
        "bias_compression", "bias_probe_accuracy"};
    return cols;
}

std::string summary_header() {
    std::string out;
    for (const auto& c : summary_columns()) {
        if (!out.empty()) out += ",";
        out += c;
    }
    return out + "\n";
}

std::string summary_row(const RunReport& report, const ExperimentConfig& config) {
    if (report.epochs.empty()) throw ContractError("summary_row: report has no epochs");
    const auto& last = report.epochs.back();
    std::vector<std::string> cells{
        report.config_hash,
        method_name(report.method),
        std::to_string(report.seed),
        std::to_string(report.epochs.size()),
        format_double(config.lambda),
        format_double(config.alpha),
        format_double(config.tau),
        config.disable_debias_positives ? "true" : "false",
        config.disable_dynamic_negatives ? "true" : "false",
        std::to_string(report.train_size),
        format_double(report.id_accuracy),
        format_double(report.ood_accuracy),
        format_double(last.train_loss),
        report.debias_set_size ? std::to_string(*report.debias_set_size) : "",
        report.queue ? std::to_string(report.queue->pushes) : "",
        report.queue ? std::to_string(report.queue->evictions) : "",
        last.probe ? format_double(last.probe->compression) : "",
        last.probe ? format_double(last.probe->probe_accuracy) : "",
    };
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ",";
        out += cells[i];
    }
    return out + "\n";
}

std::string aggregate_summaries(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(root)) {
        for (const auto& entry : std::filesystem::directory_iterator(root)) {
            const auto f = entry.path() / "summary.csv";
            if (entry.is_directory() && std::filesystem::exists(f)) files.push_back(f);
        }
    }
    std::sort(files.begin(), files.end());
    std::string out = summary_header();
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            if (header) {
                header = false;
                continue;
            }
            if (!line.empty()) out += line + "\n";
        }
    }
    return out;
}

}  // namespace debiaslab::harness
