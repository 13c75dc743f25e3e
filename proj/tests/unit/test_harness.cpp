#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "debiaslab/errors.hpp"
#include "debiaslab/harness/config.hpp"
#include "debiaslab/harness/pipeline.hpp"
#include "debiaslab/harness/report.hpp"
#include "debiaslab/sampling.hpp"
#include "fixtures.hpp"

using namespace debiaslab;
using harness::ExperimentConfig;
using harness::Method;

namespace {

ExperimentConfig small(Method m) {
    ExperimentConfig c;
    c.method = m;
    c.generator.n_train = 960;
    c.generator.n_dev = 300;
    c.generator.n_ood = 300;
    c.epochs = 2;
    c.bias_epochs = 2;
    c.batch_size = 32;
    c.queue_capacity = 256;
    c.positives = 10;
    c.probe_size = 200;
    c.probe_steps = 60;
    // A fast, confident bias-only model so the small debias set is non-empty.
    c.bias_learning_rate = 1e-2;
    c.lambda = 0.5;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config: ini round trip and key registry") {
    ExperimentConfig c;
    c.set("dct.lambda", "0.7");
    c.set("model.debias_hidden", "32,16");
    c.set("ablation.denominator", "with_positive");
    c.set("ablation.momentum_convention", "swapped");
    const auto back = harness::parse_config(c.to_ini());
    CHECK(back.to_ini() == c.to_ini());
    CHECK(back.lambda == 0.7);
    CHECK(back.momentum_convention == models::MomentumConvention::swapped);
    CHECK(back.debias_hidden == std::vector<std::size_t>{32, 16});
    for (const auto& k : ExperimentConfig::keys()) CHECK(back.get(k) == c.get(k));
}

TEST_CASE("config: errors") {
    ExperimentConfig c;
    CHECK_THROWS_AS(c.set("dct.nope", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("dct.lambda", "abc"), ConfigError);
    CHECK_THROWS_AS(c.set("experiment.method", "mystery"), ConfigError);
    CHECK_THROWS_AS(harness::parse_config("[dct\nlambda=0.5\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_config("[dct]\nunknown=1\n"), ConfigError);
    c.alpha = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    ExperimentConfig d;
    d.tau = 0.0;
    CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("config: the preset applies before explicit keys") {
    auto c = harness::parse_config("[experiment]\nlearning_rate=0.002\npreset=paper-bert\n");
    CHECK(c.learning_rate == 0.002);
    c = harness::parse_config("[experiment]\npreset=paper-bert\n");
    CHECK(c.learning_rate == 3e-5);
    CHECK(c.tau == 0.04);
    c = harness::parse_config("[dct]\ntau=0.5\n[experiment]\npreset=paper-bert\n");
    CHECK(c.tau == 0.5);
    CHECK(ExperimentConfig{}.tau == harness::parse_config("[experiment]\npreset=desk\n").tau);
}

TEST_CASE("config: hash tracks content but not the output root") {
    ExperimentConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.output_root = "/elsewhere";
    CHECK(a.hash() == b.hash());
    b.lambda = 0.5;
    CHECK(a.hash() != b.hash());
}

TEST_CASE("config: seed environment variable wins") {
    ExperimentConfig c;
    c.seed = 3;
    ::unsetenv("DEBIAS_LAB_SEED");
    CHECK_FALSE(harness::apply_seed_env(c));
    ::setenv("DEBIAS_LAB_SEED", "42", 1);
    CHECK(harness::apply_seed_env(c));
    CHECK(c.seed == 42);
    ::setenv("DEBIAS_LAB_SEED", "x1", 1);
    CHECK_THROWS_AS(harness::apply_seed_env(c), ConfigError);
    ::unsetenv("DEBIAS_LAB_SEED");
}

TEST_CASE("derived seeds are stable and distinct per stream") {
    CHECK(harness::derive_seed(1, "data") == harness::derive_seed(1, "data"));
    std::set<std::uint64_t> seen;
    for (const char* s : {"data", "debias_init", "bias_init", "bias_shuffle", "shuffle", "probe"})
        seen.insert(harness::derive_seed(1, s));
    CHECK(seen.size() == 6);
    CHECK(harness::derive_seed(1, "data") != harness::derive_seed(2, "data"));
}

TEST_CASE("evaluate: a gold-by-construction model scores 1") {
    // x = +1 for label 1, −1 for label 0; the head reads the sign of repr[0].
    models::Model m(models::EncoderConfig{1, {1}, 2, 0}, 2, models::Role::debias);
    auto& enc = m.encoder();
    enc[0].weight(0, 0) = 1.0;
    enc[0].bias(0, 0) = 0.0;
    enc[1].weight(0, 0) = 1.0;
    enc[1].weight(0, 1) = 0.0;
    enc[1].bias(0, 0) = 0.0;
    enc[1].bias(0, 1) = 0.1;
    auto& head = m.head();
    head.weight(0, 0) = -1.0;
    head.weight(0, 1) = 1.0;
    head.weight(1, 0) = 0.0;
    head.weight(1, 1) = 0.0;
    head.bias(0, 0) = head.bias(0, 1) = 0.0;
    const auto ds = fixtures::dataset({{1.0}, {-1.0}, {1.0}, {-1.0}}, {1, 0, 1, 0});
    CHECK(harness::evaluate(m, ds) == 1.0);
    const auto single = fixtures::dataset({{1.0}}, {0});
    CHECK(harness::evaluate(m, single) == 0.0);
    CHECK_THROWS_AS(harness::evaluate(m, fixtures::dataset({}, {})), ContractError);
}

TEST_CASE("evaluate: an untrained model is near chance on balanced K=3") {
    auto cfg = small(Method::ce);
    cfg.generator.n_dev = 3000;
    cfg.generator.rho_train = 1.0 / 3.0;
    const auto data = harness::generate_data(cfg);
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        models::Model m(models::default_debias_encoder(data.id_dev.feature_dim(), s), 3, models::Role::debias);
        acc += harness::evaluate(m, data.id_dev) / 5.0;
    }
    CHECK(acc == doctest::Approx(1.0 / 3.0).epsilon(0.15));
}

TEST_CASE("bias-only model: fully predictive bias, one checkpoint per epoch, determinism") {
    auto cfg = small(Method::dct);
    cfg.generator.rho_train = 1.0;
    cfg.bias_epochs = 3;
    cfg.bias_learning_rate = 1e-2;
    const auto data = harness::generate_data(cfg);
    const auto a = harness::train_bias_only(cfg, data.train);
    CHECK(a.train_accuracy >= 0.9);
    CHECK(a.checkpoints.size() == 3);
    CHECK(a.profile.epoch_probabilities.size() == 3);
    const auto b = harness::train_bias_only(cfg, data.train);
    const auto same = [](std::span<const double> x, std::span<const double> y) {
        return std::equal(x.begin(), x.end(), y.begin(), y.end());
    };
    CHECK(same(a.profile.probabilities.values(), b.profile.probabilities.values()));
    CHECK(same(a.profile.embeddings.back().rows.values(), b.profile.embeddings.back().rows.values()));
}

TEST_CASE("train: plain CE reports no debias set and no queue") {
    const auto cfg = small(Method::ce);
    const auto data = harness::generate_data(cfg);
    const auto r = harness::train_main(cfg, data, nullptr);
    CHECK_FALSE(r.report.debias_set_size.has_value());
    CHECK_FALSE(r.report.queue.has_value());
    CHECK(r.checkpoints.size() == cfg.epochs);
    CHECK(r.report.train_size == cfg.generator.n_train);
    REQUIRE(r.report.epochs.back().probe.has_value());
    CHECK_THROWS_AS(harness::train_main(small(Method::poe), data, nullptr), ContractError);
}

TEST_CASE("train: dct queue accounting and warm-up") {
    const auto cfg = small(Method::dct);
    const auto data = harness::generate_data(cfg);
    const auto bias = harness::train_bias_only(cfg, data.train);
    const auto r = harness::train_main(cfg, data, &bias);
    REQUIRE(r.report.queue.has_value());
    REQUIRE(r.report.debias_set_size.has_value());
    CHECK(*r.report.debias_set_size > 0);
    const auto& q = *r.report.queue;
    const std::size_t per_epoch = r.report.train_size / cfg.batch_size;
    CHECK(q.batches == per_epoch * cfg.epochs);
    CHECK(q.pushes == q.batches * cfg.batch_size);
    CHECK(q.final_size == std::min<std::uint64_t>(q.pushes, cfg.queue_capacity));
    CHECK(q.evictions == q.pushes - q.final_size);
    CHECK(r.report.train_size == cfg.generator.n_train + *r.report.debias_set_size);
    // ceil(0.25 · 256) = 64 queued rows means two warm-up batches of 32.
    CHECK(r.report.epochs[0].warmup_batches == 2);
    CHECK(r.report.epochs[1].warmup_batches == 0);
    CHECK(r.report.epochs[1].dct_loss.has_value());
}

TEST_CASE("debias set shrinks as lambda grows") {
    const auto cfg = small(Method::dct);
    const auto data = harness::generate_data(cfg);
    const auto bias = harness::train_bias_only(cfg, data.train);
    std::size_t prev = data.train.size() + 1;
    for (double lambda : {0.34, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        const auto set = sampling::filter_debias(data.train, bias.profile, lambda);
        CHECK(set.size() <= prev);
        prev = set.size();
    }
}

TEST_CASE("run_experiment writes a complete, reproducible run directory") {
    fixtures::TempDir tmp("harness");
    auto cfg = small(Method::dct);
    cfg.disable_dynamic_negatives = true;
    cfg.output_root = tmp.path() / "a";
    harness::RunReport ra;
    const auto dir_a = harness::run_experiment(cfg, &ra);
    for (const char* f : {"config.ini", "metrics.jsonl", "summary.csv", "timing.json", "status.json", "pca.csv",
                          "debias_ids.txt", "checkpoints/epoch_1.json", "bias_checkpoints/epoch_1.json"})
        CHECK_MESSAGE(std::filesystem::exists(dir_a / f), f);
    CHECK(slurp(dir_a / "status.json").find("\"ok\"") != std::string::npos);
    const auto metrics = slurp(dir_a / "metrics.jsonl");
    CHECK(metrics.find("\"disable_dynamic_negatives\":true") != std::string::npos);

    cfg.output_root = tmp.path() / "b";
    const auto dir_b = harness::run_experiment(cfg);
    CHECK(dir_a.filename() == dir_b.filename());
    CHECK(slurp(dir_a / "metrics.jsonl") == slurp(dir_b / "metrics.jsonl"));
    CHECK(slurp(dir_a / "summary.csv") == slurp(dir_b / "summary.csv"));

    const auto table = harness::aggregate_summaries(tmp.path() / "a");
    CHECK(table.rfind(harness::summary_header(), 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
}

TEST_CASE("summary row has one field per column") {
    const auto cfg = small(Method::ce);
    harness::RunReport r;
    r.config_hash = cfg.hash();
    r.method = Method::ce;
    r.epochs.push_back({});
    const auto row = harness::summary_row(r, cfg);
    const auto commas = static_cast<std::size_t>(std::count(row.begin(), row.end(), ','));
    CHECK(commas + 1 == harness::summary_columns().size());
}

TEST_CASE("plain CE probe accuracy moves between epochs") {
    ExperimentConfig cfg;
    cfg.method = Method::ce;
    const auto data = harness::generate_data(cfg);
    const auto r = harness::train_main(cfg, data, nullptr);
    double largest = 0.0;
    for (std::size_t e = 1; e < r.report.epochs.size(); ++e) {
        const double d = std::abs(r.report.epochs[e].probe->probe_accuracy - r.report.epochs[e - 1].probe->probe_accuracy);
        largest = std::max(largest, d);
    }
    CHECK(largest >= 0.02);
}
