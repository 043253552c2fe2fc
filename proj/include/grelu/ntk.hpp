#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "grelu/data.hpp"
#include "grelu/model.hpp"

namespace grelu {

// Output indices p are 1-based throughout this header, p in [1, d_y].

// d y_p / d W_k = (F_{k+1}^T e_p)(G_{k-1} x)^T for k = 1..L.
std::vector<Matrix> grad_wrt_layers(const GReluNetwork& net, const GatePattern& gates,
                                    std::span<const double> x, std::size_t p);

// Per-layer kernels K_k(i, j) = <F^iT e_p, F^jT e_p> <h^i_{k-1}, h^j_{k-1}>.
std::vector<Matrix> ntk_layer_kernels(const GReluNetwork& net, const GateSet& gates,
                                      const Dataset& ds, std::size_t p);
// Sum of the layer kernels; symmetric by construction.
Matrix ntk_kernel(const GReluNetwork& net, const GateSet& gates, const Dataset& ds,
                  std::size_t p);

// ‖grad y_p(x, W_1 + W') - grad y_p(x, W_1)‖_F / ‖grad y_p(x, W_1)‖_F over all
// layers, gates fixed at the pattern of x. Throws ContractError unless
// ‖W'_k‖_2 <= xi / L for every k.
double ntk_ratio(const GReluNetwork& net_init, const std::vector<Matrix>& w_prime,
                 std::span<const double> x, std::size_t p, double xi);
// W' = weights of net_t minus weights of net_init; xi = L max_k ‖W'_k‖_2.
double ntk_ratio(const GReluNetwork& net_init, const GReluNetwork& net_t,
                 std::span<const double> x, std::size_t p);

// max_{i,j} |K_t(i,j) - K_init(i,j)| / sqrt(K_init(i,i) K_init(j,j)).
// Nets must share frozen layers. A zero diagonal entry throws InputError.
double kernel_drift(const GReluNetwork& net_init, const GReluNetwork& net_t,
                    const GateSet& gates, const Dataset& ds, std::size_t p);

// "# ntk p=<p> n=<n> m=<m> L=<L>" then n rows of n values.
void write_kernel_csv(std::ostream& out, const Matrix& k, std::size_t p, std::size_t m,
                      std::size_t L);

}  // namespace grelu
