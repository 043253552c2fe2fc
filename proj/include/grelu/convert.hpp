#pragma once

#include <vector>

#include "grelu/data.hpp"
#include "grelu/model.hpp"

namespace grelu {

// Builds a Linear-readout ReLU network that reproduces the GReLU hidden values
// on the training set. Layer by layer, Wt_k is the minimal-norm solution of
// Wt_k A_k = T_k where column i of A_k is the ReLU network's ReLU(z_{k-1}) for
// example i and column i of T_k is the GReLU h_k. Requires m >= n. Throws
// ConversionError when ‖Wt_k A_k - T_k‖_F > 1e-6 ‖T_k‖_F.
ReluNetwork grelu_to_relu(const GReluNetwork& net, const GateSet& gates,
                          const Dataset& ds);

struct EquivalenceReport {
  std::vector<double> layer_deviation;  // max_i ‖footprint_k - h_k‖_inf, k = 0..L
  double max_deviation = 0.0;
  double output_deviation = 0.0;  // max_i ‖out_relu - out_grelu‖_inf
  double grelu_loss = 0.0;
  double relu_loss = 0.0;
  // Entries with h_k < -1e-8 where the ReLU network's own gate is open.
  std::size_t sign_violations = 0;

  double loss_rel_diff() const;
};

EquivalenceReport verify_equivalence(const GReluNetwork& grelu, const GateSet& gates,
                                     const ReluNetwork& relu, const Dataset& ds);

}  // namespace grelu
