#pragma once

// Batched forward and backward passes. Examples are rows: H[k] is n x m with
// row i holding the layer-k value of example i.

#include <vector>

#include "grelu/model.hpp"

namespace grelu {

struct Trace {
  // GReLU: H[k] = h_k. ReLU: H[k] = ReLU(z_k), except H[L] = z_L under a
  // Linear readout. Layer k reads H[k-1]; the readout reads H[L].
  std::vector<Matrix> H;
  Matrix out;  // n x d_y
};

Trace forward_batch(const GReluNetwork& net, const GateSet& gates, const Matrix& X);
// Masks of every example are recomputed and stored in *masks when non-null.
Trace forward_batch(const ReluNetwork& relu, const Matrix& X, GateSet* masks);

// out - Y
Matrix residuals(const Trace& trace, const Matrix& Y);

// 1/2 sum of squared entries, summed row by row in example order.
double half_squared_norm(const Matrix& r);

// Back-propagated signals: S[k-1] = g_k with g_L = D_L B^T r and
// g_k = D_k W_{k+1}^T g_{k+1}. With mask_top = false, D_L is the identity.
std::vector<Matrix> backward_signals(const std::vector<Matrix>& weights,
                                     const Matrix& B, const GateSet& gates,
                                     const Matrix& R, bool mask_top = true);

// Signals for a unit residual on output p of every example: row i of
// result[k-1] is F^i_{k+1}^T e_p.
std::vector<Matrix> output_sensitivities(const GReluNetwork& net, const GateSet& gates,
                                         std::size_t p);

// grad_k = sum_i g_k^i (layer-k input of i)^T, for k = 1..L.
std::vector<Matrix> layer_gradients(const Trace& trace,
                                    const std::vector<Matrix>& signals);

}  // namespace grelu
