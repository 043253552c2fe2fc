#pragma once

// Dense kernels behind every product in the library.
//
// The top-level functions are OpenMP-parallel. Each output element is
// accumulated by exactly one thread in a fixed order, so results do not depend
// on the thread count. `kernels::serial` holds plain textbook loops used as the
// reference in tests and in bench/kernel_bench.

#include <cstddef>
#include <span>

#include "grelu/bitmask.hpp"
#include "grelu/matrix.hpp"

namespace grelu::kernels {

// Eight independent accumulators so the compiler can vectorize without
// reassociating.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
             ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y,
                 std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

Matrix transpose(const Matrix& a);

// A * B
Matrix gemm_nn(const Matrix& a, const Matrix& b);
// A * B^T
Matrix gemm_nt(const Matrix& a, const Matrix& b);
// A^T * B
Matrix gemm_tn(const Matrix& a, const Matrix& b);

// C(i, j) = row_masks[i]->test(j) ? dot(A_i, B_j) : 0, with A n x k and
// B m x k. This is the gated layer product: rows of A are per-example vectors,
// rows of B are neuron weight rows, masks are the example's gate.
Matrix masked_gemm_nt(const Matrix& a, const Matrix& b,
                      std::span<const BitMask* const> row_masks);

Vector gemv(const Matrix& a, std::span<const double> x);    // A x
Vector gemv_t(const Matrix& a, std::span<const double> x);  // A^T x

namespace serial {

Matrix transpose(const Matrix& a);
Matrix gemm_nn(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
Matrix masked_gemm_nt(const Matrix& a, const Matrix& b,
                      std::span<const BitMask* const> row_masks);
Vector gemv(const Matrix& a, std::span<const double> x);
Vector gemv_t(const Matrix& a, std::span<const double> x);

}  // namespace serial

}  // namespace grelu::kernels
