#include <cmath>
#include <numbers>

#include "doctest.h"
#include "grelu/error.hpp"
#include "grelu/kernels.hpp"
#include "grelu/linalg.hpp"
#include "support.hpp"

using namespace grelu;
using testing::Dense;

namespace {

// Real roots of the characteristic cubic of a symmetric 3x3 matrix,
// trigonometric form.
std::pair<double, double> cubic_extremes(const Matrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix b(3, 3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) b(r, c) = (a(r, c) - (r == c ? q : 0.0)) / p;
  }
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {e3, e1};
}

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  const Matrix g = testing::random_matrix(n, n, seed);
  return 0.5 * (g + g.transpose());
}

// Solves (A^T A + ridge I) X = A^T B with a hand-written Cholesky.
Matrix ridge_normal_equations(const Matrix& a, const Matrix& b, double ridge) {
  Matrix g = kernels::gemm_tn(a, a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += ridge;
  Matrix rhs = kernels::gemm_tn(a, b);
  const std::size_t n = g.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = g(j, j);
    for (std::size_t k = 0; k < j; ++k) s -= l(j, k) * l(j, k);
    l(j, j) = std::sqrt(s);
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = g(i, j);
      for (std::size_t k = 0; k < j; ++k) t -= l(i, k) * l(j, k);
      l(i, j) = t / l(j, j);
    }
  }
  for (std::size_t c = 0; c < rhs.cols(); ++c) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = rhs(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
      y[i] = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = y[i];
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * rhs(k, c);
      rhs(i, c) = s / l(i, i);
    }
  }
  return rhs;
}

}  // namespace

TEST_CASE("gaussian_matrix rejects bad arguments") {
  const RngStream s(1, 1);
  CHECK_THROWS_AS(gaussian_matrix(0, 3, 1.0, s), DimensionError);
  CHECK_THROWS_AS(gaussian_matrix(3, 0, 1.0, s), DimensionError);
  CHECK_THROWS_AS(gaussian_matrix(3, 3, 0.0, s), ContractError);
  CHECK_THROWS_AS(gaussian_matrix(3, 3, -1.0, s), ContractError);
}

TEST_CASE("gaussian_matrix tiny variance approaches zero") {
  const Matrix a = gaussian_matrix(8, 8, 1e-300, RngStream(1, 1));
  CHECK(max_abs(a) < 1e-140);
}

TEST_CASE("gaussian_matrix is bit-reproducible") {
  const Matrix a = gaussian_matrix(17, 9, 0.5, RngStream(3, 4));
  const Matrix b = gaussian_matrix(17, 9, 0.5, RngStream(3, 4));
  CHECK(a == b);
  CHECK(!(a == gaussian_matrix(17, 9, 0.5, RngStream(3, 5))));
}

TEST_CASE("gaussian_matrix moments") {
  const double var = 0.37;
  const Matrix a = gaussian_matrix(1000, 1000, var, RngStream(77, 1));
  double mean = 0.0;
  for (double v : a.flat()) mean += v;
  mean /= 1e6;
  double s2 = 0.0;
  for (double v : a.flat()) s2 += (v - mean) * (v - mean);
  s2 /= 1e6 - 1;
  CHECK(std::abs(mean) < 5.0 * std::sqrt(var) / 1e3);
  CHECK(std::abs(s2 / var - 1.0) < 0.02);
}

TEST_CASE("gaussian_matrix at m = 4096 with variance 2/m") {
  const std::size_t m = 4096;
  const double var = 2.0 / m;
  const Matrix a = gaussian_matrix(m, m, var, RngStream(5, 16));
  double s2 = 0.0;
  for (double v : a.flat()) s2 += v * v;
  s2 /= static_cast<double>(a.size());
  CHECK(std::abs(s2 / var - 1.0) < 0.02);
}

TEST_CASE("sym_eig_extremes on simple matrices") {
  const auto d = sym_eig_extremes(Matrix{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
  CHECK(d.lambda_min == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(d.lambda_max == doctest::Approx(3.0).epsilon(1e-10));
  const auto i = sym_eig_extremes(Matrix::identity(5));
  CHECK(i.lambda_min == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(i.lambda_max == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("sym_eig_extremes matches the closed-form cubic roots") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Matrix a = random_symmetric(3, seed);
    const auto [lo, hi] = cubic_extremes(a);
    const auto e = sym_eig_extremes(a);
    const double scale = std::max(std::abs(lo), std::abs(hi));
    CHECK(std::abs(e.lambda_min - lo) <= 1e-8 * scale);
    CHECK(std::abs(e.lambda_max - hi) <= 1e-8 * scale);
  }
}

TEST_CASE("sym_eig_extremes matches a dense eigensolver on larger matrices") {
  for (std::size_t n : {10u, 60u, 300u}) {
    const Matrix a = random_symmetric(n, n);
    Eigen::SelfAdjointEigenSolver<Dense> es(testing::to_eigen(a));
    const auto e = sym_eig_extremes(a);
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::abs(e.lambda_min - es.eigenvalues()(0)) <= 1e-8 * scale);
    CHECK(std::abs(e.lambda_max - es.eigenvalues()(n - 1)) <= 1e-8 * scale);
  }
}

TEST_CASE("sym_eig_extremes rejects asymmetric input") {
  Matrix a{{1, 2}, {2.1, 1}};
  CHECK_THROWS_AS(sym_eig_extremes(a), ContractError);
  CHECK_THROWS_AS(sym_eig_extremes(Matrix(2, 3)), ContractError);
}

TEST_CASE("Rayleigh quotients lie between the extremes") {
  const Matrix a = random_symmetric(40, 99);
  const auto e = sym_eig_extremes(a);
  const double slack = 1e-8 * std::max(std::abs(e.lambda_min), std::abs(e.lambda_max));
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Vector r = testing::unit_vector(40, 1000 + t);
    const Vector ar = kernels::gemv(a, r);
    const double q = dot(r, ar);
    CHECK(q >= e.lambda_min - slack);
    CHECK(q <= e.lambda_max + slack);
  }
}

TEST_CASE("spectral_norm on closed-form cases") {
  CHECK(spectral_norm(Matrix{{-3, 0}, {0, 2}}) == doctest::Approx(3.0).epsilon(1e-10));
  const Vector u = testing::unit_vector(7, 1);
  const Vector v = testing::unit_vector(5, 2);
  Matrix uv(7, 5);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 5; ++j) uv(i, j) = 3.0 * u[i] * 2.0 * v[j];
  }
  CHECK(spectral_norm(uv) == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("spectral_norm agrees with the Gram eigenvalue") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix a = testing::random_matrix(6, 4, seed);
    const double gram = std::sqrt(sym_eig_extremes(kernels::gemm_tn(a, a)).lambda_max);
    CHECK(std::abs(spectral_norm(a) - gram) <= 1e-8 * gram);
  }
}

TEST_CASE("spectral_norm is transpose invariant") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix a = testing::random_matrix(30, 11, seed);
    const double s = spectral_norm(a);
    CHECK(std::abs(spectral_norm(a.transpose()) - s) <= 1e-10 * s);
  }
}

TEST_CASE("spectral_norm matches SVD on a wide operator") {
  const Matrix a = testing::random_matrix(50, 200, 8);
  Eigen::JacobiSVD<Dense> svd(testing::to_eigen(a));
  CHECK(std::abs(spectral_norm(a) - svd.singularValues()(0)) <= 1e-8 * svd.singularValues()(0));
}

TEST_CASE("min_norm_least_squares on identity and orthonormal systems") {
  const Matrix b = testing::random_matrix(6, 3, 4);
  CHECK(testing::rel_frob(min_norm_least_squares(Matrix::identity(6), b), b) < 1e-12);

  Eigen::HouseholderQR<Dense> qr(testing::to_eigen(testing::random_matrix(12, 5, 5)));
  const Dense q = qr.householderQ() * Dense::Identity(12, 5);
  const Matrix a = testing::from_eigen(q);
  const Matrix rhs = testing::random_matrix(12, 4, 6);
  const Matrix x = min_norm_least_squares(a, rhs);
  CHECK(testing::rel_frob(x, kernels::gemm_tn(a, rhs)) < 1e-10);
}

TEST_CASE("min_norm_least_squares matches ridge normal equations") {
  const Matrix a = testing::random_matrix(20, 8, 11);
  const Matrix b = testing::random_matrix(20, 3, 12);
  const Matrix x = min_norm_least_squares(a, b);
  CHECK(testing::rel_frob(x, ridge_normal_equations(a, b, 1e-12)) < 1e-8);
}

TEST_CASE("min_norm_least_squares residual is orthogonal to the range") {
  const Matrix a = testing::random_matrix(30, 10, 13);
  const Matrix b = testing::random_matrix(30, 4, 14);
  const Matrix x = min_norm_least_squares(a, b);
  const Matrix r = kernels::gemm_nn(a, x) - b;
  CHECK(frobenius_norm(kernels::gemm_tn(a, r)) <= 1e-8 * spectral_norm(a) * frobenius_norm(b));
}

TEST_CASE("min_norm_least_squares picks the minimal-norm solution") {
  // Underdetermined full row rank: X = A^T (A A^T)^{-1} B.
  const Matrix a = testing::random_matrix(5, 12, 21);
  const Matrix b = testing::random_matrix(5, 2, 22);
  const Matrix x = min_norm_least_squares(a, b);
  const Dense ad = testing::to_eigen(a);
  const Dense expect = ad.transpose() * (ad * ad.transpose()).ldlt().solve(testing::to_eigen(b));
  CHECK(testing::rel_frob(x, testing::from_eigen(expect)) < 1e-10);

  // Rank deficient: duplicate a column; the solution splits weight evenly.
  Matrix d(8, 3);
  const Matrix base = testing::random_matrix(8, 2, 23);
  for (std::size_t r = 0; r < 8; ++r) {
    d(r, 0) = base(r, 0);
    d(r, 1) = base(r, 1);
    d(r, 2) = base(r, 0);
  }
  const Matrix rhs = testing::random_matrix(8, 1, 24);
  const Matrix xs = min_norm_least_squares(d, rhs);
  CHECK(std::abs(xs(0, 0) - xs(2, 0)) < 1e-10 * std::abs(xs(0, 0)) + 1e-14);
}
