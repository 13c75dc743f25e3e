#include "debiaslab/ad/kernels.hpp"

#include <Eigen/Core>

namespace debiaslab::ad::kernels {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

}  // namespace

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
          std::size_t k, std::size_t n) {
    Map(out.data(), m, n).noalias() = ConstMap(a.data(), m, k) * ConstMap(b.data(), k, n);
}

void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
              std::size_t k, std::size_t n) {
    Map(out.data(), m, n).noalias() += ConstMap(a.data(), m, k) * ConstMap(b.data(), k, n);
}

void gemm_bt_acc(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
                 std::size_t k, std::size_t n) {
    Map(out.data(), m, n).noalias() += ConstMap(a.data(), m, k) * ConstMap(b.data(), n, k).transpose();
}

void gemm_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> out, std::size_t m,
                 std::size_t k, std::size_t n) {
    Map(out.data(), k, n).noalias() += ConstMap(a.data(), m, k).transpose() * ConstMap(b.data(), m, n);
}

}  // namespace debiaslab::ad::kernels
