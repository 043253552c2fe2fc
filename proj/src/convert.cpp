#include "grelu/convert.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"
#include "grelu/linalg.hpp"
#include "grelu/propagation.hpp"
#include "grelu/train.hpp"

namespace grelu {

namespace {

void check_pair(const NetworkShape& s, const GateSet& gates, const Dataset& ds) {
  if (ds.d_x() != s.d_x || ds.d_y() != s.d_y) {
    throw DimensionError("dataset dims do not match network");
  }
  if (gates.size() != ds.n()) {
    throw ContractError("have gates for " + std::to_string(gates.size()) +
                        " examples, dataset has " + std::to_string(ds.n()));
  }
}

}  // namespace

ReluNetwork grelu_to_relu(const GReluNetwork& net, const GateSet& gates,
                          const Dataset& ds) {
  const NetworkShape& s = net.shape();
  check_pair(s, gates, ds);
  if (s.m < ds.n()) {
    throw ContractError("conversion needs m >= n (m=" + std::to_string(s.m) +
                        ", n=" + std::to_string(ds.n()) + ")");
  }
  const Trace target = forward_batch(net, gates, ds.X);

  // Rows are examples, so A_k^T and T_k^T are stored directly and the system
  // solved is A_k^T Wt_k^T = T_k^T.
  Matrix a = kernels::gemm_nt(ds.X, net.C());
  for (double& v : a.flat()) v = std::max(v, 0.0);
  std::vector<Matrix> layers;
  layers.reserve(s.L);
  for (std::size_t k = 1; k <= s.L; ++k) {
    const Matrix& t = target.H[k];
    const Matrix wt_t = min_norm_least_squares(a, t);
    Matrix z = kernels::gemm_nn(a, wt_t);
    const double res = frobenius_norm(z - t);
    const double bound = 1e-6 * frobenius_norm(t);
    if (!(res <= bound)) throw ConversionError(k, res, bound);
    layers.push_back(wt_t.transpose());
    for (double& v : z.flat()) v = std::max(v, 0.0);
    a = std::move(z);
  }
  auto frozen = std::make_shared<FrozenLayers>();
  frozen->C = net.C();
  frozen->B = net.B();
  return ReluNetwork(s, std::move(frozen), std::move(layers), ReadoutMode::Linear);
}

double EquivalenceReport::loss_rel_diff() const {
  const double scale = std::max(std::abs(grelu_loss), std::abs(relu_loss));
  return scale == 0.0 ? 0.0 : std::abs(grelu_loss - relu_loss) / scale;
}

EquivalenceReport verify_equivalence(const GReluNetwork& grelu, const GateSet& gates,
                                     const ReluNetwork& relu, const Dataset& ds) {
  const NetworkShape& s = grelu.shape();
  if (s != relu.shape()) throw DimensionError("networks differ in shape");
  check_pair(s, gates, ds);
  const Trace g = forward_batch(grelu, gates, ds.X);
  EquivalenceReport rep;
  rep.layer_deviation.assign(s.L + 1, 0.0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const ReluForward r = relu_forward(relu, ds.X.row(i));
    const std::vector<Vector> fp = relu_footprint(r, relu.readout());
    for (std::size_t k = 0; k <= s.L; ++k) {
      const auto h = g.H[k].row(i);
      double dev = 0.0;
      for (std::size_t u = 0; u < s.m; ++u) {
        dev = std::max(dev, std::abs(fp[k][u] - h[u]));
        if (h[u] < -1e-8 && r.masks[k].test(u)) ++rep.sign_violations;
      }
      rep.layer_deviation[k] = std::max(rep.layer_deviation[k], dev);
    }
    for (std::size_t p = 0; p < s.d_y; ++p) {
      rep.output_deviation =
          std::max(rep.output_deviation, std::abs(r.output[p] - g.out(i, p)));
    }
  }
  rep.max_deviation =
      *std::max_element(rep.layer_deviation.begin(), rep.layer_deviation.end());
  rep.grelu_loss = half_squared_norm(residuals(g, ds.Y));
  rep.relu_loss = loss(relu, ds);
  return rep;
}

}  // namespace grelu
