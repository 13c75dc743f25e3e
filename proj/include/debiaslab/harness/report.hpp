#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "debiaslab/harness/config.hpp"
#include "debiaslab/harness/pipeline.hpp"

namespace debiaslab::harness {

/// One JSON object per epoch, newline terminated.
std::string metrics_jsonl(const RunReport& report, const ExperimentConfig& config);

const std::vector<std::string>& summary_columns();
std::string summary_header();
/// Deterministic CSV row; wall-clock is deliberately excluded.
std::string summary_row(const RunReport& report, const ExperimentConfig& config);

/// Concatenates the summary rows of every run directory under root, sorted
/// by directory name, under a single header.
std::string aggregate_summaries(const std::filesystem::path& root);

std::string format_double(double v);

}  // namespace debiaslab::harness
