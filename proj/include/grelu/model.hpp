#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "grelu/bitmask.hpp"
#include "grelu/linalg.hpp"
#include "grelu/matrix.hpp"

namespace grelu {

struct NetworkShape {
  std::size_t d_x = 0;
  std::size_t d_y = 0;
  std::size_t m = 0;
  std::size_t L = 0;

  // Throws DimensionError unless every field is >= 1.
  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

// Layers that never change after initialization. Shared between a network,
// its trained copies and converted ReLU networks. Psi may be empty for ReLU
// networks.
struct FrozenLayers {
  Matrix C;                 // m x d_x
  Matrix B;                 // d_y x m
  std::vector<Matrix> Psi;  // L of m x m

  bool operator==(const FrozenLayers&) const = default;
};

// RNG stream ids used by init_network.
namespace streams {
inline constexpr std::uint64_t kC = 1;
inline constexpr std::uint64_t kB = 2;
inline constexpr std::uint64_t kPsiBase = 16;
inline constexpr std::uint64_t kWBase = 1024;
}  // namespace streams

class GReluNetwork {
 public:
  GReluNetwork() = default;
  GReluNetwork(NetworkShape shape, std::shared_ptr<const FrozenLayers> frozen,
               std::vector<Matrix> weights);

  const NetworkShape& shape() const noexcept { return shape_; }
  const Matrix& C() const noexcept { return frozen_->C; }
  const Matrix& B() const noexcept { return frozen_->B; }
  // Layer indices are 1-based, k in [1, L].
  const Matrix& Psi(std::size_t k) const;
  const Matrix& W(std::size_t k) const;
  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  const std::shared_ptr<const FrozenLayers>& frozen() const noexcept { return frozen_; }

  // Swap in a full new set of trained layers (same shapes).
  void replace_weights(std::vector<Matrix> weights);

  bool operator==(const GReluNetwork& other) const;

 private:
  NetworkShape shape_;
  std::shared_ptr<const FrozenLayers> frozen_;
  std::vector<Matrix> weights_;
};

// Rectified: output = B ReLU(z_L). Linear: output = B z_L (no gate on the
// readout), the form produced by grelu_to_relu.
enum class ReadoutMode : std::uint8_t { Rectified = 0, Linear = 1 };

class ReluNetwork {
 public:
  ReluNetwork() = default;
  ReluNetwork(NetworkShape shape, std::shared_ptr<const FrozenLayers> frozen,
              std::vector<Matrix> weights, ReadoutMode readout);

  const NetworkShape& shape() const noexcept { return shape_; }
  const Matrix& C() const noexcept { return frozen_->C; }
  const Matrix& B() const noexcept { return frozen_->B; }
  const Matrix& Wt(std::size_t k) const;  // 1-based
  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  const std::shared_ptr<const FrozenLayers>& frozen() const noexcept { return frozen_; }
  ReadoutMode readout() const noexcept { return readout_; }

  void replace_weights(std::vector<Matrix> weights);

  bool operator==(const ReluNetwork& other) const;

 private:
  NetworkShape shape_;
  std::shared_ptr<const FrozenLayers> frozen_;
  std::vector<Matrix> weights_;
  ReadoutMode readout_ = ReadoutMode::Rectified;
};

// D_0..D_L of one example.
struct GatePattern {
  std::vector<BitMask> masks;

  const BitMask& D(std::size_t k) const { return masks.at(k); }
  bool operator==(const GatePattern&) const = default;
};
using GateSet = std::vector<GatePattern>;

// Pointers to mask k of every example, in example order.
std::vector<const BitMask*> layer_masks(const GateSet& gates, std::size_t k);

// C ~ N(0, 2/d_x), B ~ N(0, 2/d_y), Psi_k, W_k ~ N(0, 2/m), each from its
// own stream of `seed`.
GReluNetwork init_network(const NetworkShape& shape, std::uint64_t seed);
// Same C and B as init_network(shape, seed); Wt_k drawn like W_k.
ReluNetwork init_relu_network(const NetworkShape& shape, std::uint64_t seed,
                              ReadoutMode readout = ReadoutMode::Rectified);

// z_0 = [Cx]+, z_k = [Psi_k z_{k-1}]+, bit s of D_k set iff z_k[s] > 0.
// Throws InputError on non-finite x; warns on stderr once if |‖x‖ - 1| > 1e-6.
GatePattern compute_gates(const GReluNetwork& net, std::span<const double> x);
// Row i of X is example i.
GateSet compute_gates(const GReluNetwork& net, const Matrix& X);

struct Forward {
  Vector output;              // d_y
  std::vector<Vector> hidden;  // h_0..h_L
};

// h_0 = D_0 C x, h_k = D_k W_k h_{k-1}, output = B h_L.
Forward forward(const GReluNetwork& net, const GatePattern& gates,
                std::span<const double> x);

// B D_L W_L ... D_1 W_1 D_0 C, d_y x d_x.
Matrix effective_matrix(const GReluNetwork& net, const GatePattern& gates);

// All F_1..F_{L+1} and G_0..G_L of one example, built with one pass each way.
// F_{L+1} = B D_L, F_k = F_{k+1} W_k D_{k-1}; G_0 = D_0 C, G_k = D_k W_k G_{k-1}.
class SubnetworkCache {
 public:
  SubnetworkCache(const GReluNetwork& net, const GatePattern& gates);

  const Matrix& F(std::size_t k) const;  // d_y x m, k in [1, L+1]
  Matrix G(std::size_t k) const;         // m x d_x, k in [0, L]
  const Matrix& GT(std::size_t k) const;  // G_k^T, d_x x m

 private:
  std::vector<Matrix> f_;   // f_[k-1] = F_k
  std::vector<Matrix> gt_;  // gt_[k] = G_k^T
};

Matrix subnetwork_F(const GReluNetwork& net, const GatePattern& gates, std::size_t k);
Matrix subnetwork_G(const GReluNetwork& net, const GatePattern& gates, std::size_t k);

// Z_{ka,kb} = D_ka W_ka ... W_{kb+1} D_kb, 1 <= kb <= ka <= L. Dense; cubic in m.
Matrix intermediate_Z(const GReluNetwork& net, const GatePattern& gates,
                      std::size_t ka, std::size_t kb);
// Matrix-free Z_{ka,kb}; net and gates must outlive the operator.
LinearOperator z_operator(const GReluNetwork& net, const GatePattern& gates,
                          std::size_t ka, std::size_t kb);

struct ReluForward {
  Vector output;
  std::vector<Vector> pre;     // z_0..z_L
  std::vector<Vector> post;    // ReLU(z_0)..ReLU(z_L)
  std::vector<BitMask> masks;  // z_k > 0
};

// z_0 = Cx, z_k = Wt_k ReLU(z_{k-1}); readout per ReadoutMode.
ReluForward relu_forward(const ReluNetwork& relu, std::span<const double> x);

// GReLU network with Psi_k = W_k = Wt_k. For a Rectified ReLU network the
// result computes the same function with h_k = ReLU(z_k).
GReluNetwork relu_to_grelu(const ReluNetwork& relu);

// Per-layer values matched against GReLU hidden h_0..h_L: ReLU(z_0) at layer
// 0, then ReLU(z_k) for Rectified readout or z_k for Linear readout.
std::vector<Vector> relu_footprint(const ReluForward& f, ReadoutMode mode);

}  // namespace grelu
