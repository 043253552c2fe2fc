#include "grelu/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"
#include "grelu/linalg.hpp"
#include "grelu/propagation.hpp"

namespace grelu {

namespace {

std::size_t output_row(const NetworkShape& s, std::size_t p) {
  if (p < 1 || p > s.d_y) {
    throw ContractError("output index " + std::to_string(p) + " outside [1, " +
                        std::to_string(s.d_y) + "]");
  }
  return p - 1;
}

// Rank-one factors (u_k, v_k) of each layer gradient for a single example.
struct Factors {
  std::vector<Vector> u;  // F_{k+1}^T e_p
  std::vector<Vector> v;  // h_{k-1}
};

Factors factors(const GReluNetwork& net, const GatePattern& gates,
                std::span<const double> x, std::size_t p) {
  const std::size_t row = output_row(net.shape(), p);
  const Forward f = forward(net, gates, x);
  const GateSet one{gates};
  Matrix unit(1, net.shape().d_y);
  unit(0, row) = 1.0;
  const std::vector<Matrix> sig = backward_signals(net.weights(), net.B(), one, unit);
  Factors out;
  for (std::size_t k = 1; k <= net.shape().L; ++k) {
    out.u.emplace_back(sig[k - 1].row(0).begin(), sig[k - 1].row(0).end());
    out.v.push_back(f.hidden[k - 1]);
  }
  return out;
}

}  // namespace

std::vector<Matrix> grad_wrt_layers(const GReluNetwork& net, const GatePattern& gates,
                                    std::span<const double> x, std::size_t p) {
  const Factors fac = factors(net, gates, x, p);
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < fac.u.size(); ++k) {
    Matrix g(net.shape().m, net.shape().m);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (fac.u[k][r] == 0.0) continue;
      kernels::axpy(fac.u[k][r], fac.v[k].data(), g.row(r).data(), g.cols());
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Matrix> ntk_layer_kernels(const GReluNetwork& net, const GateSet& gates,
                                      const Dataset& ds, std::size_t p) {
  const std::size_t row = output_row(net.shape(), p);
  if (gates.size() != ds.n()) throw ContractError("gate count does not match dataset");
  const Trace t = forward_batch(net, gates, ds.X);
  const std::vector<Matrix> sens = output_sensitivities(net, gates, row);
  const std::size_t n = ds.n();
  std::vector<Matrix> out;
  for (std::size_t k = 1; k <= net.shape().L; ++k) {
    const Matrix uu = kernels::gemm_nt(sens[k - 1], sens[k - 1]);
    const Matrix vv = kernels::gemm_nt(t.H[k - 1], t.H[k - 1]);
    Matrix kk(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        kk(i, j) = uu(i, j) * vv(i, j);
        kk(j, i) = kk(i, j);
      }
    }
    out.push_back(std::move(kk));
  }
  return out;
}

Matrix ntk_kernel(const GReluNetwork& net, const GateSet& gates, const Dataset& ds,
                  std::size_t p) {
  const std::vector<Matrix> layers = ntk_layer_kernels(net, gates, ds, p);
  Matrix k(ds.n(), ds.n());
  for (const Matrix& l : layers) k += l;
  return k;
}

double ntk_ratio(const GReluNetwork& net_init, const std::vector<Matrix>& w_prime,
                 std::span<const double> x, std::size_t p, double xi) {
  const NetworkShape& s = net_init.shape();
  if (w_prime.size() != s.L) throw DimensionError("perturbation has wrong layer count");
  const double cap = xi / static_cast<double>(s.L);
  std::vector<Matrix> moved = net_init.weights();
  for (std::size_t k = 0; k < s.L; ++k) {
    require_same_shape(moved[k], w_prime[k], "ntk_ratio");
    const double nrm = spectral_norm(w_prime[k]);
    if (nrm > cap * (1.0 + 1e-9)) {
      throw ContractError("perturbation of layer " + std::to_string(k + 1) + " has norm " +
                          std::to_string(nrm) + " > xi/L = " + std::to_string(cap));
    }
    moved[k] += w_prime[k];
  }
  const GatePattern gates = compute_gates(net_init, x);
  GReluNetwork shifted = net_init;
  shifted.replace_weights(std::move(moved));
  const Factors a = factors(net_init, gates, x, p);
  const Factors b = factors(shifted, gates, x, p);
  // ‖u v^T - u' v'^T‖_F^2 = ‖u‖²‖v‖² + ‖u'‖²‖v'‖² - 2 (u.u')(v.v')
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < s.L; ++k) {
    const double uu = dot(a.u[k], a.u[k]);
    const double vv = dot(a.v[k], a.v[k]);
    const double uu2 = dot(b.u[k], b.u[k]);
    const double vv2 = dot(b.v[k], b.v[k]);
    const double cross = dot(a.u[k], b.u[k]) * dot(a.v[k], b.v[k]);
    num += std::max(uu * vv + uu2 * vv2 - 2.0 * cross, 0.0);
    den += uu * vv;
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

double ntk_ratio(const GReluNetwork& net_init, const GReluNetwork& net_t,
                 std::span<const double> x, std::size_t p) {
  if (net_init.shape() != net_t.shape()) throw DimensionError("networks differ in shape");
  std::vector<Matrix> w_prime;
  double tau = 0.0;
  for (std::size_t k = 1; k <= net_init.shape().L; ++k) {
    w_prime.push_back(net_t.W(k) - net_init.W(k));
    tau = std::max(tau, spectral_norm(w_prime.back()));
  }
  return ntk_ratio(net_init, w_prime, x, p, tau * static_cast<double>(net_init.shape().L));
}

double kernel_drift(const GReluNetwork& net_init, const GReluNetwork& net_t,
                    const GateSet& gates, const Dataset& ds, std::size_t p) {
  if (net_init.shape() != net_t.shape()) throw DimensionError("networks differ in shape");
  if (net_init.frozen() != net_t.frozen() && !(*net_init.frozen() == *net_t.frozen())) {
    throw ContractError("kernel_drift: networks do not share frozen layers");
  }
  const Matrix k0 = ntk_kernel(net_init, gates, ds, p);
  const Matrix kt = ntk_kernel(net_t, gates, ds, p);
  const std::size_t n = ds.n();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(k0(i, i) > 0.0)) {
      throw InputError("kernel_drift: zero diagonal entry at " + std::to_string(i));
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(kt(i, j) - k0(i, j)) / std::sqrt(k0(i, i) * k0(j, j)));
    }
  }
  return worst;
}

void write_kernel_csv(std::ostream& out, const Matrix& k, std::size_t p, std::size_t m,
                      std::size_t L) {
  out << "# ntk p=" << p << " n=" << k.rows() << " m=" << m << " L=" << L << '\n';
  char buf[40];
  for (std::size_t i = 0; i < k.rows(); ++i) {
    for (std::size_t j = 0; j < k.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace grelu
