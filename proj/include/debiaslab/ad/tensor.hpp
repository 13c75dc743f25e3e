#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace debiaslab::ad {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// The gradient buffer is allocated on first access through grad() and always
/// has the same number of entries as the values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t numel() const noexcept { return values_.size(); }
    bool is_scalar() const noexcept { return values_.size() == 1; }

    // Matrix accessors; require rank 2.
    std::size_t rows() const;
    std::size_t cols() const;
    double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);

    double item() const;

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

    bool has_grad() const noexcept { return !grad_.empty() || values_.empty(); }
    std::span<double> grad();
    std::span<const double> grad() const;
    void zero_grad();

    bool all_finite() const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    std::vector<double> values_;
    std::vector<double> grad_;
    bool requires_grad_ = false;
};

/// Throws DimensionError unless `t` is a matrix.
void require_matrix(const Tensor& t, const char* what);

}  // namespace debiaslab::ad
