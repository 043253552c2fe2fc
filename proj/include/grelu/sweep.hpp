#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "grelu/config.hpp"
#include "grelu/train.hpp"

namespace grelu {

// Grid of training runs over widths x seeds x architectures on one dataset.
//
//   data.n, data.d, data.seed
//   train.depth, train.lr (number or "theoretical"), train.iters,
//   train.target_loss, train.log_every, train.deterministic (0/1)
//   grid.widths (integers or the tokens nL, n2L), grid.seeds, grid.arches
//   output.csv, output.svg, output.log_y (0/1)
struct SweepConfig {
  std::size_t n = 16;
  std::size_t d = 8;
  std::uint64_t data_seed = 1;
  std::size_t depth = 3;
  std::string lr = "1e-3";
  std::size_t iters = 1000;
  double target_loss = 1e-3;
  std::size_t log_every = 10;
  bool deterministic = true;
  std::vector<std::string> widths;
  std::vector<std::uint64_t> seeds;
  std::vector<Arch> arches;
  std::string csv;
  std::string svg;
  bool log_y = true;

  // Unknown keys and malformed values throw FormatError.
  static SweepConfig from_flat(const FlatConfig& flat);
  FlatConfig to_flat() const;
  bool operator==(const SweepConfig&) const = default;

  // Resolves a width token against n and depth. Throws ContractError.
  std::size_t resolve_width(const std::string& token) const;
};

const char* arch_name(Arch a);
Arch parse_arch(const std::string& s);

enum class RunStatus : std::uint8_t { Target, Exhausted, Diverged };
const char* status_name(RunStatus s);

struct SweepRun {
  Arch arch = Arch::GReLU;
  std::size_t width = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::Exhausted;
  TrainLog log;
};

// Runs every grid point with `jobs` worker threads. Results are sorted by
// (arch, width, seed) independent of completion order.
std::vector<SweepRun> run_sweep(const SweepConfig& cfg, std::size_t jobs);

// arch,width,seed,status,iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms,hamming
void write_sweep_csv(std::ostream& out, const std::vector<SweepRun>& runs);
void write_sweep_svg(std::ostream& out, const std::vector<SweepRun>& runs, bool log_y);

}  // namespace grelu
