#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "debiaslab/ad/tensor.hpp"
#include "debiaslab/datagen.hpp"

namespace fixtures {

using debiaslab::ad::Shape;
using debiaslab::ad::Tensor;

Tensor uniform(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0);
Tensor unit_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols);
/// Rows drawn from a Dirichlet(1) distribution, each summing to 1.
Tensor prob_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols);
std::vector<int> labels(std::mt19937_64& rng, std::size_t n, int classes);

/// Small dataset with explicit features; ids 0..n-1 unless given.
debiaslab::data::Dataset dataset(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                                 const std::vector<bool>& aligned = {}, std::int64_t first_id = 0);

/// Gaussian representations whose coordinate 0 holds a balanced 0/1 label.
/// With `shuffle`, the labels are permuted afterwards so they carry no signal.
struct ProbeFixture {
    Tensor representations;
    std::vector<int> labels;
};
ProbeFixture probe_fixture(std::uint64_t seed, std::size_t n, std::size_t dim, bool shuffle);

/// Fresh directory under the system temp dir, removed by the destructor.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
