#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include <unistd.h>

namespace fixtures {

Tensor uniform(std::mt19937_64& rng, Shape shape, double lo, double hi) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& v : t.values()) v = u(rng);
    return t;
}

Tensor unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Tensor t({rows, cols});
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double norm = 0.0;
        for (double& v : t.row(r)) {
            v = g(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : t.row(r)) v /= norm;
    }
    return t;
}

Tensor prob_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Tensor t({rows, cols});
    std::exponential_distribution<double> e(1.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (double& v : t.row(r)) s += (v = e(rng) + 1e-3);
        for (double& v : t.row(r)) v /= s;
    }
    return t;
}

std::vector<int> labels(std::mt19937_64& rng, std::size_t n, int classes) {
    std::uniform_int_distribution<int> u(0, classes - 1);
    std::vector<int> out(n);
    for (int& y : out) y = u(rng);
    return out;
}

ProbeFixture probe_fixture(std::uint64_t seed, std::size_t n, std::size_t dim, bool shuffle) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    ProbeFixture f{Tensor({n, dim}), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        f.labels[i] = static_cast<int>(i % 2);
        f.representations(i, 0) = f.labels[i];
        for (std::size_t c = 1; c < dim; ++c) f.representations(i, c) = g(rng);
    }
    if (shuffle) std::shuffle(f.labels.begin(), f.labels.end(), rng);
    return f;
}

debiaslab::data::Dataset dataset(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                                 const std::vector<bool>& aligned, std::int64_t first_id) {
    debiaslab::data::Dataset ds;
    for (std::size_t i = 0; i < features.size(); ++i) {
        debiaslab::data::Sample s;
        s.id = first_id + static_cast<std::int64_t>(i);
        s.origin = s.id;
        s.features = features[i];
        s.label = labels[i];
        s.bias_aligned = aligned.empty() ? false : aligned[i];
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("debiaslab_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace fixtures
