#include <cmath>
#include <random>

#include "doctest.h"

#include "debiaslab/ad/ops.hpp"
#include "debiaslab/errors.hpp"
#include "debiaslab/models.hpp"
#include "fixtures.hpp"

using namespace debiaslab;
using models::EncoderConfig;
using models::Model;
using models::Role;

namespace {

// Independent forward pass: tanh hidden layers, linear projection, L2 normalization.
std::vector<double> reference_encode(const Model& m, const std::vector<double>& x) {
    std::vector<double> h = x;
    const auto& layers = m.encoder();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weight;
        std::vector<double> out(w.cols());
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double s = layers[l].bias(0, j);
            for (std::size_t i = 0; i < w.rows(); ++i) s += h[i] * w(i, j);
            out[j] = l + 1 < layers.size() ? std::tanh(s) : s;
        }
        h = out;
    }
    double norm = 0.0;
    for (double v : h) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : h) v /= norm;
    return h;
}

}  // namespace

TEST_CASE("encoder config validation") {
    EncoderConfig c{4, {3, 0}, 2, 0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = EncoderConfig{0, {3}, 2, 0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(EncoderConfig{}.validate());
}

TEST_CASE("bias-only model is under 5% of the debias model's parameters") {
    Model debias(models::default_debias_encoder(24, 0), 3, Role::debias);
    Model bias(models::default_bias_encoder(24, 0), 3, Role::bias_only);
    CHECK(static_cast<double>(bias.parameter_count()) < 0.05 * static_cast<double>(debias.parameter_count()));
}

TEST_CASE("encode output matches a straight-line forward pass") {
    std::mt19937_64 rng(3);
    Model m(EncoderConfig{6, {5, 4}, 3, 17}, 3, Role::debias);
    const auto x = fixtures::uniform(rng, {8, 6}, -2, 2);
    const auto z = models::encode(m, x);
    for (std::size_t r = 0; r < 8; ++r) {
        const auto ref = reference_encode(m, std::vector<double>(x.row(r).begin(), x.row(r).end()));
        double norm = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(z(r, c) == doctest::Approx(ref[c]).epsilon(1e-12));
            norm += z(r, c) * z(r, c);
        }
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("encoding is batch independent and tape-consistent") {
    std::mt19937_64 rng(4);
    Model m(models::default_debias_encoder(24, 1), 3, Role::debias);
    const auto x = fixtures::uniform(rng, {32, 24}, -3, 3);
    const auto full = models::encode(m, x);
    const auto one = models::encode(m, ad::Tensor({1, 24}, std::vector<double>(x.row(0).begin(), x.row(0).end())));
    for (std::size_t c = 0; c < 32; ++c) CHECK(one(0, c) == doctest::Approx(full(0, c)).epsilon(1e-13));

    ad::Tape tape;
    auto b = models::bind(tape, m);
    auto z = models::encode(b, tape.constant(x));
    for (std::size_t i = 0; i < full.numel(); ++i) {
        CHECK(z.value().values()[i] == doctest::Approx(full.values()[i]).epsilon(1e-13));
    }
    const auto blocks = models::encode_batched(m, x, 5);
    // Blocked GEMM may round differently for different row counts.
    for (std::size_t i = 0; i < full.numel(); ++i) {
        CHECK(blocks.values()[i] == doctest::Approx(full.values()[i]).epsilon(1e-13));
    }
}

TEST_CASE("encode rejects a width mismatch") {
    Model m(EncoderConfig{4, {3}, 2, 0}, 2, Role::debias);
    CHECK_THROWS_AS(models::encode(m, ad::Tensor({2, 5})), DimensionError);
    CHECK_THROWS_AS(models::classify(m, ad::Tensor({2, 3})), DimensionError);
}

TEST_CASE("classify: zero representation gives the head bias; toy fixture by hand") {
    Model m(EncoderConfig{2, {2}, 2, 0}, 2, Role::debias);
    m.head().weight = ad::Tensor::matrix({{1.0, -2.0}, {0.5, 3.0}});
    m.head().bias = ad::Tensor::matrix({{0.25, -0.75}});
    const auto zero = models::classify(m, ad::Tensor({1, 2}));
    CHECK(zero(0, 0) == 0.25);
    CHECK(zero(0, 1) == -0.75);
    const auto logits = models::classify(m, ad::Tensor::matrix({{0.6, 0.8}}));
    CHECK(logits(0, 0) == doctest::Approx(0.6 * 1.0 + 0.8 * 0.5 + 0.25));
    CHECK(logits(0, 1) == doctest::Approx(0.6 * -2.0 + 0.8 * 3.0 - 0.75));
}

TEST_CASE("initialization is seeded") {
    Model a(EncoderConfig{6, {5}, 3, 9}, 3, Role::debias);
    Model b(EncoderConfig{6, {5}, 3, 9}, 3, Role::debias);
    Model c(EncoderConfig{6, {5}, 3, 10}, 3, Role::debias);
    CHECK(a.encoder()[0].weight == b.encoder()[0].weight);
    CHECK_FALSE(a.encoder()[0].weight == c.encoder()[0].weight);
    const double bound = 1.0 / std::sqrt(6.0);
    for (double v : a.encoder()[0].weight.values()) CHECK(std::abs(v) <= bound);
    for (double v : a.encoder()[0].bias.values()) CHECK(v == 0.0);
}

TEST_CASE("momentum models are not trainable and bind as constants") {
    Model m(EncoderConfig{4, {3}, 2, 0}, 2, Role::momentum);
    CHECK_THROWS_AS(m.trainable_parameters(), ContractError);
    ad::Tape tape;
    auto b = models::bind(tape, m);
    CHECK_FALSE(tape.needs_grad(b.head.first));
}

TEST_CASE("momentum update follows the elementwise formula") {
    Model debias(EncoderConfig{5, {4}, 3, 1}, 3, Role::debias);
    Model mom(EncoderConfig{5, {4}, 3, 2}, 3, Role::momentum);
    const Model before = mom;
    models::momentum_update(mom, debias, 0.999);
    auto after = mom.parameters();
    auto old = before.parameters();
    auto src = debias.parameters();
    for (std::size_t p = 0; p < after.size(); ++p) {
        for (std::size_t i = 0; i < after[p]->numel(); ++i) {
            const double expect = 0.999 * old[p]->values()[i] + (1.0 - 0.999) * src[p]->values()[i];
            CHECK(std::abs(after[p]->values()[i] - expect) <= 1e-12);
        }
    }
}

TEST_CASE("momentum update: full copy at m=0, fixed point, swapped convention") {
    Model debias(EncoderConfig{5, {4}, 3, 1}, 3, Role::debias);
    Model mom(EncoderConfig{5, {4}, 3, 2}, 3, Role::momentum);
    models::momentum_update(mom, debias, 0.0);
    CHECK(mom.head().weight == debias.head().weight);

    Model same = debias;
    same.set_role(Role::momentum);
    models::momentum_update(same, debias, 0.7);
    CHECK(same.encoder()[0].weight == debias.encoder()[0].weight);

    Model swapped(EncoderConfig{5, {4}, 3, 2}, 3, Role::momentum);
    const Model old = swapped;
    models::momentum_update(swapped, debias, 0.9, models::MomentumConvention::swapped);
    const double v = swapped.head().weight.values()[0];
    CHECK(v == doctest::Approx(0.1 * old.head().weight.values()[0] + 0.9 * debias.head().weight.values()[0]));

    CHECK_THROWS_AS(models::momentum_update(mom, debias, 1.0), ConfigError);
    Model other(EncoderConfig{5, {6}, 3, 1}, 3, Role::momentum);
    CHECK_THROWS_AS(models::momentum_update(other, debias, 0.5), ContractError);
}

TEST_CASE("checkpoint store keeps immutable contiguous copies") {
    Model m(EncoderConfig{4, {3}, 2, 0}, 2, Role::bias_only);
    models::CheckpointStore store;
    store.save(0, m);
    const double first = m.head().weight.values()[0];
    m.head().weight.values()[0] += 1.0;
    store.save(1, m);
    CHECK(store.size() == 2);
    CHECK(store.load(0)->head().weight.values()[0] == first);
    CHECK(store.load(1)->head().weight.values()[0] == first + 1.0);
    CHECK_THROWS_AS(store.save(3, m), ContractError);
    CHECK_THROWS_AS(store.load(2), LookupError);
}

TEST_CASE("checkpoint file round trip") {
    fixtures::TempDir dir("ckpt");
    Model m(EncoderConfig{4, {3, 2}, 2, 5}, 3, Role::bias_only);
    models::write_checkpoint(dir.path() / "m.json", m);
    const Model back = models::read_checkpoint(dir.path() / "m.json");
    CHECK(back.role() == Role::bias_only);
    CHECK(back.config() == m.config());
    auto a = m.parameters();
    auto b = back.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
}
