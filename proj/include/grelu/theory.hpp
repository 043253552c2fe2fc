#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grelu/data.hpp"
#include "grelu/model.hpp"
#include "grelu/train.hpp"

namespace grelu {

struct TheoryRecord {
  std::string quantity;
  std::optional<std::size_t> k;
  std::optional<std::size_t> i;
  std::optional<std::size_t> j;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  // Informational records are written but ignored by all_pass.
  bool asserted = true;

  bool operator==(const TheoryRecord&) const = default;
};

struct TheoryReport {
  std::vector<TheoryRecord> records;

  // True when every asserted record passes.
  bool all_pass() const;
  void append(const TheoryReport& other);
  // Records whose quantity equals `name`.
  std::vector<TheoryRecord> select(const std::string& name) const;
  // Header `quantity,k,i,j,measured,bound,pass`; absent indices are empty,
  // pass is 1 or 0.
  void write_csv(std::ostream& out, bool header = true) const;
};

// alpha_x = m/12d_x, alpha_y = m/12d_y, beta_x = 27m/4d_x, beta_y = 27m/4d_y,
// alpha = sqrt(alpha_x alpha_y), beta = sqrt(beta_x beta_y).
struct SpectralConstants {
  double alpha_x = 0.0;
  double alpha_y = 0.0;
  double beta_x = 0.0;
  double beta_y = 0.0;
  double alpha = 0.0;
  double beta = 0.0;

  static SpectralConstants of(const NetworkShape& shape);
};

// Extremes of F_k F_k^T (k = 1..L+1) against [alpha_y, beta_y] and of
// G_k^T G_k (k = 0..L) against [alpha_x, beta_x], for every example.
// Quantities: FFt_min, FFt_max, GtG_min, GtG_max.
TheoryReport eig_bounds_report(const GReluNetwork& net, const GateSet& gates);

// For k = 1..L and ordered pairs i != j, the product
// |<h^j_{k-1}, h^i_{k-1}>| * ‖F^j_{k+1} F^{iT}_{k+1}‖_2 ("cross", bound
// alpha^2 / 2n), then gamma_hat = max / beta^2 against alpha^2 / (2 n beta^2).
// n < 2 gives only gamma_hat = 0.
TheoryReport cross_term_report(const GReluNetwork& net, const GateSet& gates,
                               const Dataset& ds);
double gamma_hat(const TheoryReport& cross);

// Fraction of neurons open for both inputs at each layer 0..L, from the
// propagated gates.
std::vector<double> gate_overlap(const GReluNetwork& net, std::span<const double> xi,
                                 std::span<const double> xj);
// |{s : [A u]_s > 0 and [A v]_s > 0}| / rows(A) for one Gaussian matrix A.
double direct_gate_overlap(const Matrix& a, std::span<const double> u,
                           std::span<const double> v);
// Fraction of open gates per layer, averaged over examples.
std::vector<double> open_fraction(const GateSet& gates);

// Per-layer open fraction ("open_frac", pass when |f - 1/2| <= 0.05), pairwise
// overlap of the propagated gates at layers 0 and 1 ("overlap", bound 1/3),
// overlap of Psi_k applied to the zero-padded inputs for k = 1..L when
// m >= d_x ("overlap_direct", bound 1/3) and propagated overlap at layers
// k >= 2 ("overlap_deep", informational).
TheoryReport gate_stats_report(const GReluNetwork& net, const GateSet& gates,
                               const Dataset& ds);

double z_bound_init(std::size_t L, double theta);
double z_bound_trained(std::size_t L, double theta);

// ‖Z_{ka,kb}‖_2 for every example and 1 <= kb <= ka <= L ("znorm", i set,
// k = ka, j = kb). theta in (0, 1/2); L <= 16.
TheoryReport z_norm_report(const GReluNetwork& net, const GateSet& gates,
                           double theta = 1.0 / 3.0, bool trained = false,
                           double tol = 1e-6);

struct Decomposition {
  std::vector<Matrix> lhs;    // W^i_{t+1} - W^i_t
  std::vector<Matrix> zeta;   // own-example first-order term
  std::vector<Matrix> gamma;  // cross-example first-order term
  std::vector<Matrix> delta;  // higher-order term (empty for first-order check)
  std::vector<double> residual;  // relative Frobenius, per example
  double max_residual = 0.0;
};

// W^i_{t+1} - W^i_t against -eta zeta - eta Gamma + eta^2 Delta. net_t1 must be
// one gradient step of size eta from net_t. Throws CostError for L > 6.
Decomposition decomposition_check(const GReluNetwork& net_t, const GReluNetwork& net_t1,
                                  const GateSet& gates, const Dataset& ds, double eta);
// Same identity with the eta^2 term dropped; any L. The residual is O(eta).
Decomposition decomposition_first_order(const GReluNetwork& net_t,
                                        const GReluNetwork& net_t1,
                                        const GateSet& gates, const Dataset& ds,
                                        double eta);

// Fraction of consecutive log rows (a, b) with
// loss_b <= (1 - eta alpha^2 L / 2)^(iter_b - iter_a) loss_a, relative slack 1e-12.
double descent_rate_check(const TrainLog& log, double alpha, std::size_t L, double eta);

// ‖grad_k‖_2^2 against (beta^2 + n gamma beta^2) loss, per layer ("gradnorm").
TheoryReport grad_norm_bound_check(const GReluNetwork& net, const GateSet& gates,
                                   const Dataset& ds, double beta, double gamma);

// Loss against 4 m n / d_x ("initloss").
TheoryReport initial_loss_check(const GReluNetwork& net, const GateSet& gates,
                                const Dataset& ds);

}  // namespace grelu
