#include "grelu/kernels.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#include "grelu/error.hpp"

namespace grelu::kernels {

namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* op) {
  if (lhs != rhs) {
    throw DimensionError(std::string(op) + ": inner dimension " +
                         std::to_string(lhs) + " != " + std::to_string(rhs));
  }
}

void check_masks(std::size_t rows, std::size_t cols,
                 std::span<const BitMask* const> masks) {
  if (masks.size() != rows) {
    throw DimensionError("masked_gemm_nt: one mask per output row required");
  }
  for (const BitMask* m : masks) {
    if (m == nullptr || m->size() != cols) {
      throw DimensionError("masked_gemm_nt: mask length != output columns");
    }
  }
}

constexpr std::int64_t kRowBlock = 32;
constexpr std::int64_t kColBlock = 256;

}  // namespace

Matrix transpose(const Matrix& a) {
  const std::int64_t rows = static_cast<std::int64_t>(a.rows());
  const std::int64_t cols = static_cast<std::int64_t>(a.cols());
  Matrix t(a.cols(), a.rows());
  constexpr std::int64_t kTile = 32;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t rb = 0; rb < rows; rb += kTile) {
    for (std::int64_t cb = 0; cb < cols; cb += kTile) {
      const std::int64_t re = std::min(rows, rb + kTile);
      const std::int64_t ce = std::min(cols, cb + kTile);
      for (std::int64_t r = rb; r < re; ++r) {
        for (std::int64_t c = cb; c < ce; ++c) t(c, r) = a(r, c);
      }
    }
  }
  return t;
}

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "gemm_nn");
  const std::int64_t p = static_cast<std::int64_t>(a.rows());
  const std::size_t k = a.cols();
  const std::size_t q = b.cols();
  Matrix c(a.rows(), q);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < p; ++i) {
    double* ci = c.row(static_cast<std::size_t>(i)).data();
    const double* ai = a.row(static_cast<std::size_t>(i)).data();
    for (std::size_t r = 0; r < k; ++r) {
      const double s = ai[r];
      if (s != 0.0) axpy(s, b.row(r).data(), ci, q);
    }
  }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "gemm_nt");
  const std::int64_t p = static_cast<std::int64_t>(a.rows());
  const std::int64_t q = static_cast<std::int64_t>(b.rows());
  const std::size_t k = a.cols();
  Matrix c(a.rows(), b.rows());
  const std::int64_t row_blocks = (p + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t ib = 0; ib < row_blocks; ++ib) {
    for (std::int64_t j = 0; j < q; ++j) {
      const double* bj = b.row(static_cast<std::size_t>(j)).data();
      const std::int64_t ie = std::min(p, (ib + 1) * kRowBlock);
      for (std::int64_t i = ib * kRowBlock; i < ie; ++i) {
        c(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
            dot(a.row(static_cast<std::size_t>(i)).data(), bj, k);
      }
    }
  }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "gemm_tn");
  const std::size_t k = a.rows();
  const std::int64_t p = static_cast<std::int64_t>(a.cols());
  const std::size_t q = b.cols();
  Matrix c(a.cols(), q);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < p; ++s) {
    double* cs = c.row(static_cast<std::size_t>(s)).data();
    for (std::size_t r = 0; r < k; ++r) {
      const double v = a(r, static_cast<std::size_t>(s));
      if (v != 0.0) axpy(v, b.row(r).data(), cs, q);
    }
  }
  return c;
}

Matrix masked_gemm_nt(const Matrix& a, const Matrix& b,
                      std::span<const BitMask* const> row_masks) {
  check_inner(a.cols(), b.cols(), "masked_gemm_nt");
  check_masks(a.rows(), b.rows(), row_masks);
  const std::size_t n = a.rows();
  const std::int64_t m = static_cast<std::int64_t>(b.rows());
  const std::size_t k = a.cols();
  Matrix c(n, b.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < m; ++j) {
    const std::size_t uj = static_cast<std::size_t>(j);
    const double* bj = b.row(uj).data();
    for (std::size_t i = 0; i < n; ++i) {
      if (row_masks[i]->test(uj)) c(i, uj) = dot(a.row(i).data(), bj, k);
    }
  }
  return c;
}

Vector gemv(const Matrix& a, std::span<const double> x) {
  check_inner(a.cols(), x.size(), "gemv");
  const std::int64_t rows = static_cast<std::int64_t>(a.rows());
  Vector y(a.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    y[static_cast<std::size_t>(r)] =
        dot(a.row(static_cast<std::size_t>(r)).data(), x.data(), x.size());
  }
  return y;
}

Vector gemv_t(const Matrix& a, std::span<const double> x) {
  check_inner(a.rows(), x.size(), "gemv_t");
  const std::int64_t cols = static_cast<std::int64_t>(a.cols());
  const std::int64_t blocks = (cols + kColBlock - 1) / kColBlock;
  Vector y(a.cols(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t cb = 0; cb < blocks; ++cb) {
    const std::int64_t c0 = cb * kColBlock;
    const std::size_t len =
        static_cast<std::size_t>(std::min(cols, c0 + kColBlock) - c0);
    double* yb = y.data() + c0;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double v = x[r];
      if (v != 0.0) axpy(v, a.row(r).data() + c0, yb, len);
    }
  }
  return y;
}

namespace serial {

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
  }
  return t;
}

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), "serial::gemm_nn");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.cols(); ++r) s += a(i, r) * b(r, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), "serial::gemm_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.cols(); ++r) s += a(i, r) * b(j, r);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), "serial::gemm_tn");
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * b(r, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix masked_gemm_nt(const Matrix& a, const Matrix& b,
                      std::span<const BitMask* const> row_masks) {
  check_inner(a.cols(), b.cols(), "serial::masked_gemm_nt");
  check_masks(a.rows(), b.rows(), row_masks);
  Matrix c = gemm_nt(a, b);
  for (std::size_t i = 0; i < c.rows(); ++i) {
    for (std::size_t j = 0; j < c.cols(); ++j) {
      if (!row_masks[i]->test(j)) c(i, j) = 0.0;
    }
  }
  return c;
}

Vector gemv(const Matrix& a, std::span<const double> x) {
  check_inner(a.cols(), x.size(), "serial::gemv");
  Vector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) y[r] += a(r, c) * x[c];
  }
  return y;
}

Vector gemv_t(const Matrix& a, std::span<const double> x) {
  check_inner(a.rows(), x.size(), "serial::gemv_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) y[c] += a(r, c) * x[r];
  }
  return y;
}

}  // namespace serial

}  // namespace grelu::kernels
