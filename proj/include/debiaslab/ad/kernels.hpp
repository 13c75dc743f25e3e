#pragma once

#include <cstddef>
#include <span>

namespace debiaslab::ad::kernels {

// Row-major dense kernels shared by the tape ops and the tape-free inference
// paths. Outputs are overwritten unless the name says otherwise.

/// out[m×n] = a[m×k] · b[k×n]
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> out,
          std::size_t m, std::size_t k, std::size_t n);

/// out[m×n] += a[m×k] · b[n×k]ᵀ
void gemm_bt_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t n);

/// out[k×n] += a[m×k]ᵀ · b[m×n]
void gemm_at_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t n);

/// out[m×n] += a[m×k] · b[k×n]
void gemm_acc(std::span<const double> a, std::span<const double> b, std::span<double> out,
              std::size_t m, std::size_t k, std::size_t n);

}  // namespace debiaslab::ad::kernels
