#include "grelu/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"

namespace grelu {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed start vector; any vector with no exact zero eigen-components works.
constexpr std::uint64_t kStartSeed = 0x4c414e43305ull;

void orthogonalize(std::span<double> w, const std::vector<Vector>& basis) {
  // Two passes of classical Gram-Schmidt ("twice is enough").
  for (int pass = 0; pass < 2; ++pass) {
    for (const Vector& q : basis) {
      const double c = kernels::dot(q.data(), w.data(), w.size());
      kernels::axpy(-c, q.data(), w.data(), w.size());
    }
  }
}

struct RitzState {
  double theta_min = 0.0;
  double theta_max = 0.0;
  double res_min = 0.0;
  double res_max = 0.0;
  Eigen::VectorXd s_min;
  Eigen::VectorXd s_max;
};

RitzState ritz(const std::vector<double>& alpha, const std::vector<double>& beta,
               double last_beta) {
  const Eigen::Index k = static_cast<Eigen::Index>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), k);
  Eigen::VectorXd sub(std::max<Eigen::Index>(k - 1, 0));
  for (Eigen::Index i = 0; i + 1 < k; ++i) sub(i) = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  RitzState r;
  r.theta_min = es.eigenvalues()(0);
  r.theta_max = es.eigenvalues()(k - 1);
  r.s_min = es.eigenvectors().col(0);
  r.s_max = es.eigenvectors().col(k - 1);
  r.res_min = std::abs(last_beta * r.s_min(k - 1));
  r.res_max = std::abs(last_beta * r.s_max(k - 1));
  return r;
}

}  // namespace

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double variance,
                       const RngStream& rng) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("gaussian_matrix: zero dimension " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ContractError("gaussian_matrix: variance must be positive and finite");
  }
  Matrix out(rows, cols);
  rng.fill_normal(out.flat(), std::sqrt(variance));
  return out;
}

EigExtremes sym_eig_extremes(std::size_t n, const SymApply& apply,
                             const LanczosOptions& opts) {
  if (n == 0) throw DimensionError("sym_eig_extremes: empty operator");
  const std::size_t cap = std::min(n, std::max<std::size_t>(opts.max_dim, 2));

  Vector start(n);
  const RngStream start_rng(kStartSeed, n);
  for (std::size_t i = 0; i < n; ++i) start[i] = start_rng.uniform(i) - 0.5;

  EigExtremes best{std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  std::vector<Vector> basis;
  std::vector<double> alpha;
  std::vector<double> beta;
  Vector w(n);

  for (std::size_t restart = 0; restart <= opts.max_restarts; ++restart) {
    basis.clear();
    alpha.clear();
    beta.clear();
    const double s0 = norm2(start);
    if (s0 == 0.0) break;
    for (double& v : start) v /= s0;
    basis.push_back(start);

    std::size_t next_check = std::min<std::size_t>(cap, 10);
    RitzState state;
    bool converged = false;
    while (true) {
      const Vector& q = basis.back();
      apply(q, w);
      const double a = kernels::dot(q.data(), w.data(), n);
      alpha.push_back(a);
      orthogonalize(w, basis);
      const double b = norm2(w);
      const std::size_t dim = alpha.size();
      const double local = std::abs(a) + (beta.empty() ? 0.0 : beta.back());
      const bool breakdown = b <= 1e-14 * local || b == 0.0;
      if (breakdown || dim >= next_check || dim == cap) {
        state = ritz(alpha, beta, breakdown ? 0.0 : b);
        best.lambda_min = std::min(best.lambda_min, state.theta_min);
        best.lambda_max = std::max(best.lambda_max, state.theta_max);
        const double scale =
            std::max(std::abs(best.lambda_min), std::abs(best.lambda_max));
        const bool ok_min = !opts.need_min || state.res_min <= opts.tol * scale;
        const bool ok_max = !opts.need_max || state.res_max <= opts.tol * scale;
        converged = breakdown || dim == n || (ok_min && ok_max);
        if (converged || dim == cap) break;
        next_check = std::min(cap, dim + std::max<std::size_t>(dim / 2, 4));
      }
      beta.push_back(b);
      Vector next(n);
      for (std::size_t i = 0; i < n; ++i) next[i] = w[i] / b;
      basis.push_back(std::move(next));
    }
    if (converged) return best;

    // Restart from the unconverged Ritz vectors.
    std::fill(start.begin(), start.end(), 0.0);
    const bool min_open = opts.need_min;
    const bool max_open = opts.need_max;
    for (std::size_t j = 0; j < basis.size(); ++j) {
      const Eigen::Index jj = static_cast<Eigen::Index>(j);
      const double c = (min_open ? state.s_min(jj) : 0.0) +
                       (max_open ? state.s_max(jj) : 0.0);
      kernels::axpy(c, basis[j].data(), start.data(), n);
    }
  }
  return best;
}

EigExtremes sym_eig_extremes(const Matrix& a, const LanczosOptions& opts) {
  if (a.rows() != a.cols()) {
    throw ContractError("sym_eig_extremes: matrix is " + std::to_string(a.rows()) +
                        "x" + std::to_string(a.cols()) + ", not square");
  }
  if (a.empty()) throw DimensionError("sym_eig_extremes: empty matrix");
  const double tol = 1e-9 * max_abs(a);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = r + 1; c < a.cols(); ++c) {
      if (std::abs(a(r, c) - a(c, r)) > tol) {
        throw ContractError("sym_eig_extremes: matrix is not symmetric at (" +
                            std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    }
  }
  return sym_eig_extremes(
      a.rows(),
      [&a](std::span<const double> x, std::span<double> y) {
        const Vector v = kernels::gemv(a, x);
        std::copy(v.begin(), v.end(), y.begin());
      },
      opts);
}

double spectral_norm(const LinearOperator& op, double tol) {
  if (op.rows == 0 || op.cols == 0) return 0.0;
  LanczosOptions opts;
  opts.tol = tol;
  opts.need_min = false;
  EigExtremes e;
  if (op.cols <= op.rows) {
    Vector tmp(op.rows);
    e = sym_eig_extremes(
        op.cols,
        [&](std::span<const double> x, std::span<double> y) {
          op.apply(x, tmp);
          op.apply_t(tmp, y);
        },
        opts);
  } else {
    Vector tmp(op.cols);
    e = sym_eig_extremes(
        op.rows,
        [&](std::span<const double> x, std::span<double> y) {
          op.apply_t(x, tmp);
          op.apply(tmp, y);
        },
        opts);
  }
  return std::sqrt(std::max(e.lambda_max, 0.0));
}

double spectral_norm(const Matrix& a, double tol) {
  LinearOperator op;
  op.rows = a.rows();
  op.cols = a.cols();
  op.apply = [&a](std::span<const double> x, std::span<double> y) {
    const Vector v = kernels::gemv(a, x);
    std::copy(v.begin(), v.end(), y.begin());
  };
  op.apply_t = [&a](std::span<const double> x, std::span<double> y) {
    const Vector v = kernels::gemv_t(a, x);
    std::copy(v.begin(), v.end(), y.begin());
  };
  return spectral_norm(op, tol);
}

Matrix min_norm_least_squares(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("min_norm_least_squares: A has " +
                         std::to_string(a.rows()) + " rows, B has " +
                         std::to_string(b.rows()));
  }
  if (a.empty() || b.cols() == 0) return Matrix(a.cols(), b.cols());
  const Eigen::Map<const RowMajor> am(a.data(), static_cast<Eigen::Index>(a.rows()),
                                      static_cast<Eigen::Index>(a.cols()));
  const Eigen::Map<const RowMajor> bm(b.data(), static_cast<Eigen::Index>(b.rows()),
                                      static_cast<Eigen::Index>(b.cols()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(am, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const RowMajor x = svd.solve(bm);
  Matrix out(a.cols(), b.cols());
  std::copy(x.data(), x.data() + x.size(), out.data());
  return out;
}

}  // namespace grelu
