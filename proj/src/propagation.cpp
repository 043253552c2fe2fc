#include "grelu/propagation.hpp"

#include <algorithm>
#include <string>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"

namespace grelu {

namespace {

void check_batch(const NetworkShape& s, const Matrix& X) {
  if (X.cols() != s.d_x) {
    throw ContractError("inputs have " + std::to_string(X.cols()) +
                        " columns, expected " + std::to_string(s.d_x));
  }
}

void mask_rows(Matrix& a, const std::vector<const BitMask*>& masks) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    const BitMask& mask = *masks[i];
    for (std::size_t s = 0; s < row.size(); ++s) {
      if (!mask.test(s)) row[s] = 0.0;
    }
  }
}

}  // namespace

Trace forward_batch(const GReluNetwork& net, const GateSet& gates, const Matrix& X) {
  const NetworkShape& s = net.shape();
  check_batch(s, X);
  if (gates.size() != X.rows()) {
    throw ContractError("have gates for " + std::to_string(gates.size()) +
                        " examples, dataset has " + std::to_string(X.rows()));
  }
  Trace t;
  t.H.reserve(s.L + 1);
  t.H.push_back(kernels::masked_gemm_nt(X, net.C(), layer_masks(gates, 0)));
  for (std::size_t k = 1; k <= s.L; ++k) {
    t.H.push_back(kernels::masked_gemm_nt(t.H.back(), net.W(k), layer_masks(gates, k)));
  }
  t.out = kernels::gemm_nt(t.H.back(), net.B());
  return t;
}

Trace forward_batch(const ReluNetwork& relu, const Matrix& X, GateSet* masks) {
  const NetworkShape& s = relu.shape();
  check_batch(s, X);
  const std::size_t n = X.rows();
  if (masks != nullptr) {
    masks->assign(n, GatePattern{});
    for (auto& g : *masks) g.masks.reserve(s.L + 1);
  }
  Trace t;
  t.H.reserve(s.L + 1);
  Matrix z = kernels::gemm_nt(X, relu.C());
  for (std::size_t k = 0;; ++k) {
    if (masks != nullptr) {
      for (std::size_t i = 0; i < n; ++i) {
        BitMask b(s.m);
        const auto row = z.row(i);
        for (std::size_t j = 0; j < s.m; ++j) {
          if (row[j] > 0.0) b.set(j);
        }
        (*masks)[i].masks.push_back(std::move(b));
      }
    }
    if (k == s.L && relu.readout() == ReadoutMode::Linear) {
      t.H.push_back(std::move(z));
      break;
    }
    for (double& v : z.flat()) v = std::max(v, 0.0);
    t.H.push_back(std::move(z));
    if (k == s.L) break;
    z = kernels::gemm_nt(t.H.back(), relu.Wt(k + 1));
  }
  t.out = kernels::gemm_nt(t.H.back(), relu.B());
  return t;
}

Matrix residuals(const Trace& trace, const Matrix& Y) {
  require_same_shape(trace.out, Y, "residuals");
  return trace.out - Y;
}

double half_squared_norm(const Matrix& r) {
  double total = 0.0;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    const auto row = r.row(i);
    total += kernels::dot(row.data(), row.data(), row.size());
  }
  return 0.5 * total;
}

std::vector<Matrix> backward_signals(const std::vector<Matrix>& weights,
                                     const Matrix& B, const GateSet& gates,
                                     const Matrix& R, bool mask_top) {
  const std::size_t L = weights.size();
  if (L == 0) throw ContractError("backward_signals: no layers");
  if (R.rows() != gates.size() || R.cols() != B.rows()) {
    throw DimensionError("backward_signals: residual shape mismatch");
  }
  std::vector<Matrix> sig(L);
  // Row i of R B is (B^T r_i)^T.
  Matrix g = kernels::gemm_nn(R, B);
  if (mask_top) mask_rows(g, layer_masks(gates, L));
  sig[L - 1] = std::move(g);
  for (std::size_t k = L - 1; k >= 1; --k) {
    // Row form of W_{k+1}^T g_{k+1} is g_{k+1}^T W_{k+1}.
    Matrix prev = kernels::gemm_nn(sig[k], weights[k]);
    mask_rows(prev, layer_masks(gates, k));
    sig[k - 1] = std::move(prev);
  }
  return sig;
}

std::vector<Matrix> output_sensitivities(const GReluNetwork& net, const GateSet& gates,
                                         std::size_t p) {
  if (p >= net.shape().d_y) {
    throw ContractError("output index " + std::to_string(p) + " outside [0, " +
                        std::to_string(net.shape().d_y) + ")");
  }
  Matrix unit(gates.size(), net.shape().d_y);
  for (std::size_t i = 0; i < unit.rows(); ++i) unit(i, p) = 1.0;
  return backward_signals(net.weights(), net.B(), gates, unit);
}

std::vector<Matrix> layer_gradients(const Trace& trace,
                                    const std::vector<Matrix>& signals) {
  std::vector<Matrix> grads;
  grads.reserve(signals.size());
  for (std::size_t k = 1; k <= signals.size(); ++k) {
    grads.push_back(kernels::gemm_tn(signals[k - 1], trace.H[k - 1]));
  }
  return grads;
}

}  // namespace grelu
