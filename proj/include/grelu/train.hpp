#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grelu/data.hpp"
#include "grelu/error.hpp"
#include "grelu/model.hpp"

namespace grelu {

// 1/2 sum_i ‖W^i x_i - y_i‖^2 with the stored gates.
double loss(const GReluNetwork& net, const GateSet& gates, const Dataset& ds);
double loss(const ReluNetwork& relu, const Dataset& ds);

// Gradient of the loss with respect to W_k, k in [1, L].
Matrix layer_gradient(const GReluNetwork& net, const GateSet& gates,
                      const Dataset& ds, std::size_t k);
// All layers at once; entry k-1 is the gradient for W_k.
std::vector<Matrix> all_layer_gradients(const GReluNetwork& net, const GateSet& gates,
                                        const Dataset& ds);
std::vector<Matrix> all_layer_gradients(const ReluNetwork& relu, const Dataset& ds);

// d_x / (n^4 L^3 d_y)
double theoretical_lr(const NetworkShape& shape, std::size_t n);

enum class Arch : std::uint8_t { GReLU, ReLU };

struct TrainConfig {
  double eta = 1e-3;
  bool eta_theoretical = false;  // replace eta with theoretical_lr
  std::size_t max_iters = 1000;
  double target_loss = 0.0;
  Arch arch = Arch::GReLU;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
  // Reductions are always in fixed example order; this flag additionally
  // zeroes the wall clock column so logs compare byte for byte.
  bool deterministic_reduction = true;
  bool track_tau = true;
  // ReLU runs always record Hamming drift; GReLU runs only when set.
  bool track_hamming = false;
  double divergence_factor = 1e6;

  void validate() const;
};

struct TrainRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;   // Frobenius norm of all layer gradients together
  double grad_tdiff = 0.0;  // ‖grad_t - grad_{t-1}‖ over the same concatenation
  double tau = 0.0;         // max_k ‖W_{t,k} - W_{0,k}‖_2 over log points so far
  double eta = 0.0;
  double wall_ms = 0.0;
  std::optional<double> hamming;  // drift of masks between steps t-1 and t

  bool operator==(const TrainRow&) const = default;
};

struct TrainLog {
  std::vector<std::string> comments;  // emitted as "# ..." lines
  bool has_hamming = false;
  std::vector<TrainRow> rows;

  void write_csv(std::ostream& out) const;
  static TrainLog read_csv(std::istream& in);
};

enum class StopReason : std::uint8_t { TargetReached, ItersExhausted };

template <class Net>
struct TrainResult {
  Net net;
  TrainLog log;
  StopReason reason = StopReason::ItersExhausted;
  std::size_t iters = 0;
};

// Thrown when the loss leaves the finite range or exceeds divergence_factor
// times the initial loss. Carries the log up to that point.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iter, double loss, TrainLog log)
      : Error("diverged at iteration " + std::to_string(iter) + " (loss " +
              std::to_string(loss) + ")"),
        iter_(iter),
        log_(std::move(log)) {}
  std::size_t iter() const noexcept { return iter_; }
  const TrainLog& log() const noexcept { return log_; }

 private:
  std::size_t iter_;
  TrainLog log_;
};

// Full-batch gradient descent with all layers updated from the gradients at
// W_t. The GReLU gates must belong to ds; they are reused at every step.
TrainResult<GReluNetwork> train(GReluNetwork net, const GateSet& gates,
                                const Dataset& ds, const TrainConfig& cfg);
// Subgradient descent, masks recomputed on every forward pass.
TrainResult<ReluNetwork> train(ReluNetwork relu, const Dataset& ds,
                               const TrainConfig& cfg);

// Fraction of (example, layer, neuron) triples whose gate differs. Rectified
// networks compare all L+1 layers, Linear ones the L layers that gate.
double hamming_activation_drift(const ReluNetwork& a, const ReluNetwork& b,
                                const Dataset& ds);
// Recomputes both gate sets from Psi and C.
double hamming_activation_drift(const GReluNetwork& a, const GReluNetwork& b,
                                const Dataset& ds);
// Drift between two stored mask sets over the first `layers` layers.
double mask_drift(const GateSet& a, const GateSet& b, std::size_t layers);

}  // namespace grelu
