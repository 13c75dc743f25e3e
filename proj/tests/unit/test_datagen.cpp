#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"

#include "debiaslab/datagen.hpp"
#include "debiaslab/errors.hpp"
#include "debiaslab/probing.hpp"
#include "fixtures.hpp"

using namespace debiaslab;
using data::GeneratorConfig;

namespace {

GeneratorConfig small(std::uint64_t seed = 1) {
    GeneratorConfig c;
    c.n_train = 3000;
    c.n_dev = 600;
    c.n_ood = 600;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    GeneratorConfig c;
    c.num_classes = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GeneratorConfig{};
    c.rho_train = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GeneratorConfig{};
    c.n_ood = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GeneratorConfig{};
    c.task_separation = 3.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    // Four equidistant prototypes need at least three dimensions.
    c = GeneratorConfig{};
    c.num_classes = 4;
    c.task_dim = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(GeneratorConfig{}.validate());
}

TEST_CASE("simplex prototypes are pairwise equidistant") {
    for (std::size_t k : {2u, 3u, 5u}) {
        const auto p = data::simplex_prototypes(k, 8, 4.5);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a + 1; b < k; ++b) {
                double d = 0.0;
                for (std::size_t c = 0; c < 8; ++c) d += (p(a, c) - p(b, c)) * (p(a, c) - p(b, c));
                CHECK(std::sqrt(d) == doctest::Approx(4.5).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("degenerate alignment probabilities") {
    auto c = small();
    c.rho_train = 1.0;
    c.rho_ood = 0.0;
    const auto d = data::generate(c);
    CHECK(data::measure_alignment(d.train) == 1.0);
    CHECK(data::measure_alignment(d.id_dev) == 1.0);
    CHECK(data::measure_alignment(d.ood) == 0.0);
}

TEST_CASE("empirical alignment follows binomial concentration") {
    auto c = small(7);
    c.n_train = 10000;
    c.rho_train = 0.9;
    const double a = data::measure_alignment(data::generate(c).train);
    CHECK(std::abs(a - 0.9) <= 3.0 * std::sqrt(0.9 * 0.1 / 10000.0));

    c.n_train = 4000;
    c.rho_train = 0.5;
    CHECK(std::abs(data::measure_alignment(data::generate(c).train) - 0.5) <= 0.03);
}

TEST_CASE("unaligned samples carry another class's bias prototype") {
    auto c = small(3);
    c.sigma_bias = 1e-9;
    const auto d = data::generate(c);
    const auto protos = data::simplex_prototypes(c.num_classes, c.bias_dim, c.bias_separation * c.sigma_bias);
    for (const auto& s : d.train.samples) {
        std::size_t nearest = 0;
        double best = 1e300;
        for (std::size_t k = 0; k < c.num_classes; ++k) {
            double dist = 0.0;
            for (std::size_t j = 0; j < c.bias_dim; ++j) {
                const double diff = s.features[c.task_dim + j] - protos(k, j);
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                nearest = k;
            }
        }
        CHECK((static_cast<int>(nearest) == s.label) == s.bias_aligned);
    }
}

TEST_CASE("generation is deterministic and ids are unique across splits") {
    const auto a = data::generate(small(5));
    const auto b = data::generate(small(5));
    CHECK(a.train == b.train);
    CHECK(a.ood == b.ood);
    const auto c = data::generate(small(6));
    CHECK_FALSE(a.train == c.train);
    std::map<data::SampleId, int> seen;
    for (const auto* ds : {&a.train, &a.id_dev, &a.ood}) {
        for (const auto& s : ds->samples) CHECK(seen[s.id]++ == 0);
    }
}

TEST_CASE("classes are balanced") {
    const auto d = data::generate(small(2));
    std::map<int, std::size_t> counts;
    for (const auto& s : d.train.samples) ++counts[s.label];
    for (const auto& [label, n] : counts) CHECK(std::abs(static_cast<double>(n) - 1000.0) <= 100.0);
}

TEST_CASE("task block alone is linearly separable at the default noise") {
    auto c = small(9);
    const auto d = data::generate(c);
    // Probe on the task block of train+dev.
    data::Dataset merged = d.train;
    merged.samples.insert(merged.samples.end(), d.id_dev.samples.begin(), d.id_dev.samples.end());
    ad::Tensor x({merged.size(), c.task_dim});
    std::vector<int> y;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        for (std::size_t j = 0; j < c.task_dim; ++j) x(i, j) = merged.samples[i].features[j];
        y.push_back(merged.samples[i].label);
    }
    probing::ProbeConfig pc;
    pc.label_classes = c.num_classes;
    const double acc = probing::probe_accuracy(x, y, 3000.0 / 3600.0, 1, pc);
    CHECK(acc >= 0.95);
}

TEST_CASE("dataset file round trip is bit exact") {
    fixtures::TempDir dir("datagen");
    auto c = small(4);
    c.n_train = 100;
    const auto d = data::generate(c);
    data::write_dataset(dir.path() / "train.jsonl", d.train);
    const auto back = data::read_dataset(dir.path() / "train.jsonl", data::Split::train);
    CHECK(back == d.train);
}

TEST_CASE("origin survives the round trip") {
    fixtures::TempDir dir("origin");
    auto ds = fixtures::dataset({{1.0}, {2.0}}, {0, 1});
    ds.samples[1].origin = 0;
    data::write_dataset(dir.path() / "d.jsonl", ds);
    const auto back = data::read_dataset(dir.path() / "d.jsonl");
    CHECK(back.samples[1].origin == 0);
    CHECK(back.samples[0].origin == back.samples[0].id);
}

TEST_CASE("hand-written file parses with its stated ids") {
    fixtures::TempDir dir("fixture");
    const auto path = dir.path() / "ext.jsonl";
    std::ofstream(path) << R"({"id": 17, "features": [0.5, -1.25], "label": 1, "bias_aligned": true})" << "\n"
                        << "\n"
                        << R"({"id": 3, "features": [1e-3, 2], "label": 0, "bias_aligned": false})" << "\n"
                        << R"({"id": 99, "features": [0, 0], "label": 2, "bias_aligned": false})" << "\n";
    const auto ds = data::read_dataset(path, data::Split::ood);
    REQUIRE(ds.size() == 3);
    CHECK(ds.samples[0].id == 17);
    CHECK(ds.samples[1].id == 3);
    CHECK(ds.samples[2].id == 99);
    CHECK(ds.samples[0].features[1] == -1.25);
    CHECK(ds.samples[0].bias_aligned);
    CHECK(ds.split == data::Split::ood);
    CHECK(ds.num_classes() == 3);
}

TEST_CASE("malformed records report their line") {
    fixtures::TempDir dir("bad");
    const auto path = dir.path() / "bad.jsonl";
    std::ofstream(path) << R"({"id": 1, "features": [0.5], "label": 1, "bias_aligned": true})" << "\n"
                        << R"({"id": 2, "features": [0.5], "bias_aligned": true})" << "\n";
    try {
        data::read_dataset(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(std::string(e.what()).find("label") != std::string::npos);
    }

    std::ofstream(path) << "{not json\n";
    CHECK_THROWS_AS(data::read_dataset(path), ParseError);

    std::ofstream(path) << R"({"id": 1, "features": [0.5], "label": 1, "bias_aligned": true})" << "\n"
                        << R"({"id": 2, "features": [0.5, 1.0], "label": 0, "bias_aligned": true})" << "\n";
    CHECK_THROWS_AS(data::read_dataset(path), SchemaError);

    std::ofstream(path) << R"({"id": 1, "features": [0.5], "label": 1, "bias_aligned": true})" << "\n"
                        << R"({"id": 1, "features": [0.7], "label": 0, "bias_aligned": true})" << "\n";
    CHECK_THROWS_AS(data::read_dataset(path), SchemaError);
}

TEST_CASE("measure_alignment") {
    auto ds = fixtures::dataset({{0}, {0}, {0}, {0}}, {0, 0, 1, 1}, {true, false, true, true});
    CHECK(data::measure_alignment(ds) == 0.75);
    CHECK_THROWS_AS(data::measure_alignment(data::Dataset{}), ContractError);
}
