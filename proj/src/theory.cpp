#include "grelu/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"
#include "grelu/linalg.hpp"
#include "grelu/propagation.hpp"

namespace grelu {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TheoryRecord record(std::string q, std::optional<std::size_t> k,
                    std::optional<std::size_t> i, std::optional<std::size_t> j,
                    double measured, double bound, bool pass) {
  return TheoryRecord{std::move(q), k, i, j, measured, bound, pass};
}

void check_setup(const GReluNetwork& net, const GateSet& gates, const Dataset* ds) {
  for (const GatePattern& g : gates) {
    if (g.masks.size() != net.shape().L + 1) {
      throw ContractError("gate pattern depth does not match network");
    }
  }
  if (ds != nullptr) {
    if (ds->n() != gates.size()) {
      throw ContractError("have gates for " + std::to_string(gates.size()) +
                          " examples, dataset has " + std::to_string(ds->n()));
    }
    if (ds->d_x() != net.shape().d_x || ds->d_y() != net.shape().d_y) {
      throw DimensionError("dataset dims do not match network");
    }
  }
}

double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(frobenius_norm(a), frobenius_norm(b));
  if (scale == 0.0) return 0.0;
  return frobenius_norm(a - b) / scale;
}

// rows * Z_{a,b}, computed row by row from the right-hand side of the chain.
Matrix times_z(Matrix rows, const GReluNetwork& net, const GatePattern& g,
               std::size_t a, std::size_t b) {
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    Vector v(rows.row(r).begin(), rows.row(r).end());
    for (std::size_t s = 0; s < v.size(); ++s) {
      if (!g.D(a).test(s)) v[s] = 0.0;
    }
    for (std::size_t j = a; j > b; --j) {
      v = kernels::gemv_t(net.W(j), v);
      for (std::size_t s = 0; s < v.size(); ++s) {
        if (!g.D(j - 1).test(s)) v[s] = 0.0;
      }
    }
    std::copy(v.begin(), v.end(), rows.row(r).begin());
  }
  return rows;
}

// Effective matrices W^i of every example.
std::vector<Matrix> effective_all(const GReluNetwork& net, const GateSet& gates) {
  std::vector<Matrix> out;
  out.reserve(gates.size());
  for (const GatePattern& g : gates) out.push_back(effective_matrix(net, g));
  return out;
}

Decomposition decompose(const GReluNetwork& net_t, const GReluNetwork& net_t1,
                        const GateSet& gates, const Dataset& ds, double eta,
                        bool with_delta) {
  check_setup(net_t, gates, &ds);
  if (net_t.shape() != net_t1.shape()) throw DimensionError("networks differ in shape");
  const std::size_t n = ds.n();
  const std::size_t L = net_t.shape().L;
  const std::vector<Matrix> grads = all_layer_gradients(net_t, gates, ds);
  const Trace trace = forward_batch(net_t, gates, ds.X);
  const Matrix r = residuals(trace, ds.Y);

  std::vector<SubnetworkCache> caches;
  caches.reserve(n);
  for (const GatePattern& g : gates) caches.emplace_back(net_t, g);

  const std::vector<Matrix> before = effective_all(net_t, gates);
  const std::vector<Matrix> after = effective_all(net_t1, gates);

  Decomposition d;
  for (std::size_t i = 0; i < n; ++i) {
    d.lhs.push_back(after[i] - before[i]);
    Matrix zeta(net_t.shape().d_y, net_t.shape().d_x);
    Matrix gamma(net_t.shape().d_y, net_t.shape().d_x);
    for (std::size_t k = 1; k <= L; ++k) {
      const Matrix& fi = caches[i].F(k + 1);
      const Matrix& gti = caches[i].GT(k - 1);
      for (std::size_t j = 0; j < n; ++j) {
        // F^i F^jT r_j x_j^T G^jT G^i, with G^j x_j = h^j_{k-1}.
        const Matrix& fj = caches[j].F(k + 1);
        const Matrix ff = kernels::gemm_nt(fi, fj);  // d_y x d_y
        const Vector fr = kernels::gemv(ff, r.row(j));
        const Vector hg = kernels::gemv(gti, trace.H[k - 1].row(j));  // G^iT h^j
        Matrix& target = (i == j) ? zeta : gamma;
        for (std::size_t p = 0; p < fr.size(); ++p) {
          for (std::size_t q = 0; q < hg.size(); ++q) target(p, q) += fr[p] * hg[q];
        }
      }
    }
    Matrix rhs = (-eta) * zeta;
    rhs.axpy(-eta, gamma);
    Matrix delta;
    if (with_delta) {
      delta = Matrix(net_t.shape().d_y, net_t.shape().d_x);
      // Subsets k_1 > ... > k_s of [1, L], s >= 2, as bit masks.
      for (std::uint32_t mask = 0; mask < (1u << L); ++mask) {
        const int s = std::popcount(mask);
        if (s < 2) continue;
        std::vector<std::size_t> ks;
        for (std::size_t k = L; k >= 1; --k) {
          if (mask & (1u << (k - 1))) ks.push_back(k);
        }
        Matrix p = kernels::gemm_nn(caches[i].F(ks[0] + 1), grads[ks[0] - 1]);
        for (std::size_t q = 1; q < ks.size(); ++q) {
          p = times_z(std::move(p), net_t, gates[i], ks[q - 1] - 1, ks[q]);
          p = kernels::gemm_nn(p, grads[ks[q] - 1]);
        }
        p = kernels::gemm_nt(p, caches[i].GT(ks.back() - 1));
        delta.axpy(std::pow(-eta, s - 2), p);
      }
      rhs.axpy(eta * eta, delta);
    }
    d.residual.push_back(rel_diff(d.lhs.back(), rhs));
    d.max_residual = std::max(d.max_residual, d.residual.back());
    d.zeta.push_back(std::move(zeta));
    d.gamma.push_back(std::move(gamma));
    if (with_delta) d.delta.push_back(std::move(delta));
  }
  return d;
}

}  // namespace

bool TheoryReport::all_pass() const {
  return std::all_of(records.begin(), records.end(),
                     [](const TheoryRecord& r) { return r.pass || !r.asserted; });
}

void TheoryReport::append(const TheoryReport& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
}

std::vector<TheoryRecord> TheoryReport::select(const std::string& name) const {
  std::vector<TheoryRecord> out;
  for (const TheoryRecord& r : records) {
    if (r.quantity == name) out.push_back(r);
  }
  return out;
}

void TheoryReport::write_csv(std::ostream& out, bool header) const {
  if (header) out << "quantity,k,i,j,measured,bound,pass\n";
  auto idx = [](const std::optional<std::size_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (const TheoryRecord& r : records) {
    out << r.quantity << ',' << idx(r.k) << ',' << idx(r.i) << ',' << idx(r.j) << ','
        << fmt(r.measured) << ',' << fmt(r.bound) << ',' << (r.pass ? 1 : 0) << '\n';
  }
}

SpectralConstants SpectralConstants::of(const NetworkShape& shape) {
  const double m = static_cast<double>(shape.m);
  const double dx = static_cast<double>(shape.d_x);
  const double dy = static_cast<double>(shape.d_y);
  SpectralConstants c;
  c.alpha_x = m / (12.0 * dx);
  c.alpha_y = m / (12.0 * dy);
  c.beta_x = 27.0 * m / (4.0 * dx);
  c.beta_y = 27.0 * m / (4.0 * dy);
  c.alpha = std::sqrt(c.alpha_x * c.alpha_y);
  c.beta = std::sqrt(c.beta_x * c.beta_y);
  return c;
}

TheoryReport eig_bounds_report(const GReluNetwork& net, const GateSet& gates) {
  check_setup(net, gates, nullptr);
  const SpectralConstants c = SpectralConstants::of(net.shape());
  const std::size_t L = net.shape().L;
  TheoryReport rep;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const SubnetworkCache cache(net, gates[i]);
    for (std::size_t k = 1; k <= L + 1; ++k) {
      const Matrix& f = cache.F(k);
      const EigExtremes e = sym_eig_extremes(kernels::gemm_nt(f, f));
      rep.records.push_back(record("FFt_min", k, i, {}, e.lambda_min, c.alpha_y,
                                   e.lambda_min >= c.alpha_y));
      rep.records.push_back(record("FFt_max", k, i, {}, e.lambda_max, c.beta_y,
                                   e.lambda_max <= c.beta_y));
    }
    for (std::size_t k = 0; k <= L; ++k) {
      const Matrix& gt = cache.GT(k);
      const EigExtremes e = sym_eig_extremes(kernels::gemm_nt(gt, gt));
      rep.records.push_back(record("GtG_min", k, i, {}, e.lambda_min, c.alpha_x,
                                   e.lambda_min >= c.alpha_x));
      rep.records.push_back(record("GtG_max", k, i, {}, e.lambda_max, c.beta_x,
                                   e.lambda_max <= c.beta_x));
    }
  }
  return rep;
}

TheoryReport cross_term_report(const GReluNetwork& net, const GateSet& gates,
                               const Dataset& ds) {
  check_setup(net, gates, &ds);
  const SpectralConstants c = SpectralConstants::of(net.shape());
  const std::size_t n = ds.n();
  const std::size_t L = net.shape().L;
  const std::size_t dy = net.shape().d_y;
  TheoryReport rep;
  const double nd = static_cast<double>(n);
  const double gamma_bound = c.alpha * c.alpha / (2.0 * nd * c.beta * c.beta);
  if (n < 2) {
    rep.records.push_back(record("gamma_hat", {}, {}, {}, 0.0, gamma_bound, true));
    return rep;
  }
  const Trace trace = forward_batch(net, gates, ds.X);
  std::vector<std::vector<Matrix>> sens;  // sens[p][k-1] row i = F^i_{k+1}^T e_p
  for (std::size_t p = 0; p < dy; ++p) sens.push_back(output_sensitivities(net, gates, p));

  const double pair_bound = c.alpha * c.alpha / (2.0 * nd);
  double worst = 0.0;
  for (std::size_t k = 1; k <= L; ++k) {
    const Matrix hh = kernels::gemm_nt(trace.H[k - 1], trace.H[k - 1]);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        Matrix ff(dy, dy);  // F^j F^iT
        for (std::size_t p = 0; p < dy; ++p) {
          for (std::size_t q = 0; q < dy; ++q) {
            ff(p, q) = dot(sens[p][k - 1].row(j), sens[q][k - 1].row(i));
          }
        }
        const double ffn = dy == 1 ? std::abs(ff(0, 0)) : spectral_norm(ff);
        const double prod = std::abs(hh(j, i)) * ffn;
        worst = std::max(worst, prod);
        rep.records.push_back(record("cross", k, i, j, prod, pair_bound, prod <= pair_bound));
      }
    }
  }
  const double g = worst / (c.beta * c.beta);
  rep.records.push_back(record("gamma_hat", {}, {}, {}, g, gamma_bound, g <= gamma_bound));
  return rep;
}

double gamma_hat(const TheoryReport& cross) {
  for (const TheoryRecord& r : cross.records) {
    if (r.quantity == "gamma_hat") return r.measured;
  }
  throw ContractError("report has no gamma_hat record");
}

std::vector<double> gate_overlap(const GReluNetwork& net, std::span<const double> xi,
                                 std::span<const double> xj) {
  const GatePattern a = compute_gates(net, xi);
  const GatePattern b = compute_gates(net, xj);
  std::vector<double> out;
  for (std::size_t k = 0; k < a.masks.size(); ++k) {
    out.push_back(static_cast<double>(a.masks[k].count_and(b.masks[k])) /
                  static_cast<double>(net.shape().m));
  }
  return out;
}

double direct_gate_overlap(const Matrix& a, std::span<const double> u,
                           std::span<const double> v) {
  const Vector au = kernels::gemv(a, u);
  const Vector av = kernels::gemv(a, v);
  std::size_t both = 0;
  for (std::size_t s = 0; s < au.size(); ++s) {
    if (au[s] > 0.0 && av[s] > 0.0) ++both;
  }
  return static_cast<double>(both) / static_cast<double>(a.rows());
}

std::vector<double> open_fraction(const GateSet& gates) {
  if (gates.empty()) return {};
  std::vector<double> out(gates.front().masks.size(), 0.0);
  for (const GatePattern& g : gates) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] += static_cast<double>(g.masks[k].count()) /
                static_cast<double>(g.masks[k].size());
    }
  }
  for (double& v : out) v /= static_cast<double>(gates.size());
  return out;
}

TheoryReport gate_stats_report(const GReluNetwork& net, const GateSet& gates,
                               const Dataset& ds) {
  check_setup(net, gates, &ds);
  const NetworkShape& s = net.shape();
  const double m = static_cast<double>(s.m);
  const double third = 1.0 / 3.0;
  TheoryReport rep;
  const std::vector<double> open = open_fraction(gates);
  for (std::size_t k = 0; k < open.size(); ++k) {
    rep.records.push_back(
        record("open_frac", k, {}, {}, open[k], 0.05, std::abs(open[k] - 0.5) <= 0.05));
  }
  std::vector<Matrix> padded;
  if (s.m >= s.d_x) {
    Matrix xp(ds.n(), s.m);
    for (std::size_t i = 0; i < ds.n(); ++i) {
      std::copy(ds.X.row(i).begin(), ds.X.row(i).end(), xp.row(i).begin());
    }
    for (std::size_t k = 1; k <= s.L; ++k) {
      Matrix z = kernels::gemm_nt(xp, net.Psi(k));  // n x m
      padded.push_back(std::move(z));
    }
  }
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = i + 1; j < ds.n(); ++j) {
      for (std::size_t k = 0; k <= s.L; ++k) {
        const double v =
            static_cast<double>(gates[i].D(k).count_and(gates[j].D(k))) / m;
        TheoryRecord r = record(k <= 1 ? "overlap" : "overlap_deep", k, i, j, v, third,
                                v <= third);
        r.asserted = k <= 1;
        rep.records.push_back(std::move(r));
      }
      for (std::size_t k = 1; k <= padded.size(); ++k) {
        const auto a = padded[k - 1].row(i);
        const auto b = padded[k - 1].row(j);
        std::size_t both = 0;
        for (std::size_t u = 0; u < s.m; ++u) {
          if (a[u] > 0.0 && b[u] > 0.0) ++both;
        }
        const double v = static_cast<double>(both) / m;
        rep.records.push_back(record("overlap_direct", k, i, j, v, third, v <= third));
      }
    }
  }
  return rep;
}

double z_bound_init(std::size_t L, double theta) {
  return std::sqrt(12.0 * static_cast<double>(L)) * std::exp(theta / 2.0) /
         std::sqrt(theta);
}

double z_bound_trained(std::size_t L, double theta) {
  return 4.0 * std::sqrt(static_cast<double>(L)) * std::exp(theta / 2.0) /
         std::sqrt(theta);
}

TheoryReport z_norm_report(const GReluNetwork& net, const GateSet& gates, double theta,
                           bool trained, double tol) {
  if (!(theta > 0.0 && theta < 0.5)) throw ContractError("theta must lie in (0, 1/2)");
  check_setup(net, gates, nullptr);
  const std::size_t L = net.shape().L;
  if (L > 16) throw CostError("z_norm_report is limited to L <= 16");
  const double bound = trained ? z_bound_trained(L, theta) : z_bound_init(L, theta);
  TheoryReport rep;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    for (std::size_t ka = 1; ka <= L; ++ka) {
      for (std::size_t kb = 1; kb <= ka; ++kb) {
        double v;
        if (ka == kb) {
          v = gates[i].D(ka).count() > 0 ? 1.0 : 0.0;
        } else {
          v = spectral_norm(z_operator(net, gates[i], ka, kb), tol);
        }
        rep.records.push_back(record("znorm", ka, i, kb, v, bound, v <= bound));
      }
    }
  }
  return rep;
}

Decomposition decomposition_check(const GReluNetwork& net_t, const GReluNetwork& net_t1,
                                  const GateSet& gates, const Dataset& ds, double eta) {
  if (net_t.shape().L > 6) {
    throw CostError("decomposition_check enumerates 2^L subsets; L = " +
                    std::to_string(net_t.shape().L) + " exceeds 6");
  }
  return decompose(net_t, net_t1, gates, ds, eta, true);
}

Decomposition decomposition_first_order(const GReluNetwork& net_t,
                                        const GReluNetwork& net_t1,
                                        const GateSet& gates, const Dataset& ds,
                                        double eta) {
  return decompose(net_t, net_t1, gates, ds, eta, false);
}

double descent_rate_check(const TrainLog& log, double alpha, std::size_t L, double eta) {
  if (log.rows.size() < 2) throw ContractError("descent check needs at least two log rows");
  const double rate = eta * alpha * alpha * static_cast<double>(L) / 2.0;
  if (!(rate < 1.0) || rate < 0.0) {
    throw ContractError("rate factor eta alpha^2 L / 2 = " + fmt(rate) + " is not in [0, 1)");
  }
  std::size_t ok = 0;
  for (std::size_t r = 1; r < log.rows.size(); ++r) {
    const TrainRow& a = log.rows[r - 1];
    const TrainRow& b = log.rows[r];
    const double steps = static_cast<double>(b.iter - a.iter);
    const double allowed = std::pow(1.0 - rate, steps) * a.loss * (1.0 + 1e-12);
    if (b.loss <= allowed) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(log.rows.size() - 1);
}

TheoryReport grad_norm_bound_check(const GReluNetwork& net, const GateSet& gates,
                                   const Dataset& ds, double beta, double gamma) {
  check_setup(net, gates, &ds);
  const double l = loss(net, gates, ds);
  const std::vector<Matrix> grads = all_layer_gradients(net, gates, ds);
  const double nd = static_cast<double>(ds.n());
  const double bound = (beta * beta + nd * gamma * beta * beta) * l;
  TheoryReport rep;
  for (std::size_t k = 1; k <= grads.size(); ++k) {
    const double s = spectral_norm(grads[k - 1]);
    rep.records.push_back(record("gradnorm", k, {}, {}, s * s, bound, s * s <= bound));
  }
  return rep;
}

TheoryReport initial_loss_check(const GReluNetwork& net, const GateSet& gates,
                                const Dataset& ds) {
  check_setup(net, gates, &ds);
  const double l = loss(net, gates, ds);
  const double bound = 4.0 * static_cast<double>(net.shape().m) *
                       static_cast<double>(ds.n()) / static_cast<double>(net.shape().d_x);
  TheoryReport rep;
  rep.records.push_back(record("initloss", {}, {}, {}, l, bound, l <= bound));
  return rep;
}

}  // namespace grelu
