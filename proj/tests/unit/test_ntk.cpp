#include <cmath>
#include <sstream>

#include "doctest.h"
#include "grelu/ntk.hpp"
#include "grelu/train.hpp"
#include "support.hpp"

using namespace grelu;

namespace {

struct Setup {
  GReluNetwork net;
  Dataset ds;
  GateSet gates;
};

Setup make(const NetworkShape& s, std::size_t n, std::uint64_t seed) {
  Setup out{init_network(s, seed), testing::random_dataset(n, s.d_x, s.d_y, seed + 5), {}};
  out.gates = compute_gates(out.net, out.ds.X);
  return out;
}

double output_with(const GReluNetwork& net, const GatePattern& g, std::span<const double> x,
                   std::size_t p, std::size_t k, std::size_t r, std::size_t c, double d) {
  std::vector<Matrix> w = net.weights();
  w[k](r, c) += d;
  const GReluNetwork moved(net.shape(), net.frozen(), std::move(w));
  return forward(moved, g, x).output[p - 1];
}

double frob_inner(const Matrix& a, const Matrix& b) { return dot(a.flat(), b.flat()); }

std::vector<Matrix> scaled_weights(const GReluNetwork& net, double c) {
  std::vector<Matrix> w = net.weights();
  for (Matrix& m : w) m *= c;
  return w;
}

}  // namespace

TEST_CASE("output gradients agree with central differences") {
  const Setup s = make({3, 2, 6, 3}, 1, 1);
  const auto x = s.ds.X.row(0);
  for (std::size_t p = 1; p <= 2; ++p) {
    const auto g = grad_wrt_layers(s.net, s.gates[0], x, p);
    REQUIRE(g.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t r = 0; r < 6; ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
          const double h = 1e-6;
          const double fd = (output_with(s.net, s.gates[0], x, p, k, r, c, h) -
                             output_with(s.net, s.gates[0], x, p, k, r, c, -h)) /
                            (2 * h);
          CHECK(g[k](r, c) == doctest::Approx(fd).epsilon(1e-7).scale(1e-8));
        }
      }
    }
  }
  CHECK_THROWS_AS(grad_wrt_layers(s.net, s.gates[0], x, 0), ContractError);
  CHECK_THROWS_AS(grad_wrt_layers(s.net, s.gates[0], x, 3), ContractError);
}

TEST_CASE("kernel equals inner products of flattened gradients") {
  const Setup s = make({4, 2, 16, 2}, 4, 2);
  for (std::size_t p = 1; p <= 2; ++p) {
    const Matrix k = ntk_kernel(s.net, s.gates, s.ds, p);
    const auto layers = ntk_layer_kernels(s.net, s.gates, s.ds, p);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto gi = grad_wrt_layers(s.net, s.gates[i], s.ds.X.row(i), p);
      for (std::size_t j = 0; j < 4; ++j) {
        const auto gj = grad_wrt_layers(s.net, s.gates[j], s.ds.X.row(j), p);
        double total = 0.0;
        for (std::size_t l = 0; l < 2; ++l) {
          const double v = frob_inner(gi[l], gj[l]);
          CHECK(layers[l](i, j) == doctest::Approx(v).epsilon(1e-12));
          total += v;
        }
        CHECK(k(i, j) == doctest::Approx(total).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("kernel is symmetric and positive semidefinite") {
  const Setup s = make({6, 1, 32, 3}, 12, 3);
  const Matrix k = ntk_kernel(s.net, s.gates, s.ds, 1);
  CHECK(k == k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(testing::to_eigen(k));
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());
  Matrix sum(12, 12);
  for (const Matrix& l : ntk_layer_kernels(s.net, s.gates, s.ds, 1)) {
    CHECK(l == l.transpose());
    sum += l;
  }
  CHECK(testing::rel_frob(sum, k) < 1e-15);
  CHECK_THROWS_AS(ntk_kernel(s.net, s.gates, s.ds, 2), ContractError);
}

TEST_CASE("ratio is zero without a perturbation and matches a dense evaluation") {
  const Setup s = make({4, 1, 12, 3}, 1, 4);
  const auto x = s.ds.X.row(0);
  std::vector<Matrix> zero(3, Matrix(12, 12));
  CHECK(ntk_ratio(s.net, zero, x, 1, 0.0) == 0.0);

  std::vector<Matrix> wp;
  double cap = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    wp.push_back(testing::random_matrix(12, 12, 50 + k, 1e-3));
    cap = std::max(cap, spectral_norm(wp.back()));
  }
  const double r = ntk_ratio(s.net, wp, x, 1, 3 * cap);
  std::vector<Matrix> moved = s.net.weights();
  for (std::size_t k = 0; k < 3; ++k) moved[k] += wp[k];
  const GReluNetwork shifted(s.net.shape(), s.net.frozen(), moved);
  const auto g0 = grad_wrt_layers(s.net, s.gates[0], x, 1);
  const auto g1 = grad_wrt_layers(shifted, s.gates[0], x, 1);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double a = frobenius_norm(g1[k] - g0[k]);
    const double b = frobenius_norm(g0[k]);
    num += a * a;
    den += b * b;
  }
  CHECK(r == doctest::Approx(std::sqrt(num / den)).epsilon(1e-6));
  CHECK(r > 0.0);

  CHECK(ntk_ratio(s.net, shifted, x, 1) == doctest::Approx(r).epsilon(1e-6));
  CHECK_THROWS_AS(ntk_ratio(s.net, wp, x, 1, 0.5 * cap), ContractError);
  CHECK_THROWS_AS(ntk_ratio(s.net, std::vector<Matrix>(2, Matrix(12, 12)), x, 1, 1.0),
                  DimensionError);
}

TEST_CASE("two-layer ratio is invariant to flipping the perturbation sign") {
  // With L = 2 the gradient change is linear in W'.
  const Setup s = make({5, 1, 20, 2}, 3, 5);
  std::vector<Matrix> wp;
  std::vector<Matrix> neg;
  double cap = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    wp.push_back(testing::random_matrix(20, 20, 60 + k, 0.01));
    neg.push_back(-1.0 * wp.back());
    cap = std::max(cap, spectral_norm(wp.back()));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const auto x = s.ds.X.row(i);
    CHECK(ntk_ratio(s.net, wp, x, 1, 2 * cap) ==
          doctest::Approx(ntk_ratio(s.net, neg, x, 1, 2 * cap)).epsilon(1e-9));
  }
}

TEST_CASE("ratio grows with the perturbation size") {
  const Setup s = make({5, 1, 24, 3}, 1, 6);
  std::vector<Matrix> base;
  for (std::size_t k = 0; k < 3; ++k) base.push_back(testing::random_matrix(24, 24, 70 + k, 1.0 / 24));
  double prev = 0.0;
  for (double c : {0.01, 0.05, 0.2}) {
    std::vector<Matrix> wp = base;
    double cap = 0.0;
    for (Matrix& m : wp) {
      m *= c;
      cap = std::max(cap, spectral_norm(m));
    }
    const double r = ntk_ratio(s.net, wp, s.ds.X.row(0), 1, 3 * cap);
    CHECK(r > prev);
    prev = r;
  }
}

TEST_CASE("drift under uniform weight scaling has a closed form") {
  for (std::size_t L : {2u, 3u}) {
    const Setup s = make({4, 1, 16, L}, 5, 7 + L);
    for (double c : {1.1, 0.8}) {
      const GReluNetwork scaled(s.net.shape(), s.net.frozen(), scaled_weights(s.net, c));
      const double want = std::abs(std::pow(c, 2.0 * (L - 1.0)) - 1.0);
      CHECK(kernel_drift(s.net, scaled, s.gates, s.ds, 1) == doctest::Approx(want).epsilon(1e-10));
    }
    CHECK(kernel_drift(s.net, s.net, s.gates, s.ds, 1) == 0.0);
  }
}

TEST_CASE("drift requires the same frozen layers") {
  const Setup s = make({4, 1, 8, 2}, 3, 9);
  const GReluNetwork other = init_network({4, 1, 8, 2}, 10);
  CHECK_THROWS_AS(kernel_drift(s.net, other, s.gates, s.ds, 1), ContractError);
  // An equal copy of the frozen layers is accepted.
  const GReluNetwork copy(s.net.shape(), std::make_shared<FrozenLayers>(*s.net.frozen()),
                          s.net.weights());
  CHECK(kernel_drift(s.net, copy, s.gates, s.ds, 1) == 0.0);
}

TEST_CASE("drift rejects an example with no gradient") {
  auto frozen = std::make_shared<FrozenLayers>();
  frozen->C = Matrix{{1.0}, {1.0}};
  frozen->B = Matrix{{1.0, 1.0}};
  frozen->Psi = {Matrix::identity(2), Matrix::identity(2)};
  const GReluNetwork net({1, 1, 2, 2}, frozen, {Matrix::identity(2), Matrix::identity(2)});
  // x = -1 closes every first-layer gate.
  const Dataset ds = make_dataset(Matrix{{1.0}, {-1.0}}, Matrix(2, 1));
  CHECK_THROWS_AS(kernel_drift(net, net, compute_gates(net, ds.X), ds, 1), InputError);
}

TEST_CASE("kernel csv layout") {
  std::ostringstream out;
  write_kernel_csv(out, Matrix{{1.0, 0.5}, {0.5, 0.25}}, 1, 64, 3);
  CHECK(out.str() == "# ntk p=1 n=2 m=64 L=3\n1,0.5\n0.5,0.25\n");
}
