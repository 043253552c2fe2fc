#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "grelu/model.hpp"

namespace grelu {

// "GRNW" checkpoint, version 1, little-endian:
//   magic[4] u32 version u32 flags u64 d_x d_y m L
//   C, B, [Psi_1..Psi_L], W_1..W_L  (f64, row-major)
// flags bit 0: Psi omitted (ReLU network, W holds Wt)
// flags bit 1: linear readout
namespace grnw {
inline constexpr std::uint32_t kNoPsi = 1u;
inline constexpr std::uint32_t kLinearReadout = 2u;
}  // namespace grnw

using Checkpoint = std::variant<GReluNetwork, ReluNetwork>;

void write_network(const GReluNetwork& net, std::ostream& out);
void write_network(const ReluNetwork& net, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

void save_network(const GReluNetwork& net, const std::string& path);
void save_network(const ReluNetwork& net, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
// Throw FormatError when the file holds the other architecture.
GReluNetwork load_network(const std::string& path);
ReluNetwork load_relu_network(const std::string& path);

// "GRGP" gate cache: magic[4] u64 n u64 layers u64 m, then for each example
// and layer ceil(m/8) bytes, bit u of the mask at byte u/8, bit u%8.
// Padding bits must be zero.
void write_gates(const GateSet& gates, std::ostream& out);
GateSet read_gates(std::istream& in);
void save_gates(const GateSet& gates, const std::string& path);
GateSet load_gates(const std::string& path);

}  // namespace grelu
