#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "grelu/matrix.hpp"
#include "grelu/rng.hpp"

namespace grelu {

// Entries i.i.d. N(0, variance), entry (r, c) taken from draw r*cols + c of
// the stream.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double variance,
                       const RngStream& rng);

struct EigExtremes {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

// y = A x for a symmetric n x n operator that is never formed explicitly.
using SymApply = std::function<void(std::span<const double> x, std::span<double> y)>;

struct LanczosOptions {
  // Ritz residual target, relative to the largest |eigenvalue| seen.
  double tol = 1e-8;
  std::size_t max_dim = 500;
  std::size_t max_restarts = 40;
  bool need_min = true;
  bool need_max = true;
};

// Extreme eigenvalues by Lanczos with full reorthogonalization and a fixed
// start vector. Once the Krylov space spans R^n the result is exact up to
// rounding, so small matrices need no special path.
EigExtremes sym_eig_extremes(std::size_t n, const SymApply& apply,
                             const LanczosOptions& opts = {});
// Dense overload; throws ContractError unless A is square and symmetric to
// 1e-9 * max|A|.
EigExtremes sym_eig_extremes(const Matrix& a, const LanczosOptions& opts = {});

// Matrix-free rectangular operator: apply is x -> A x, apply_t is y -> A^T y.
struct LinearOperator {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  std::function<void(std::span<const double>, std::span<double>)> apply_t;
};

double spectral_norm(const LinearOperator& op, double tol = 1e-8);
double spectral_norm(const Matrix& a, double tol = 1e-8);

// argmin ||A X - B||_F of minimal Frobenius norm. Singular values below
// sigma_max * 1e-10 are treated as zero.
Matrix min_norm_least_squares(const Matrix& a, const Matrix& b);

}  // namespace grelu
