// grelu: experiment runner for gated ReLU networks.
//
// Exit codes: 0 ok, 1 runtime error, 2 iteration budget exhausted,
// 3 divergence, 4 probe quota not met, 64 usage, 65 file I/O or format.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "grelu/config.hpp"
#include "grelu/convert.hpp"
#include "grelu/data.hpp"
#include "grelu/error.hpp"
#include "grelu/io.hpp"
#include "grelu/model.hpp"
#include "grelu/ntk.hpp"
#include "grelu/propagation.hpp"
#include "grelu/sweep.hpp"
#include "grelu/theory.hpp"
#include "grelu/train.hpp"

namespace {

using namespace grelu;

enum Exit : int {
  kOk = 0,
  kRuntime = 1,
  kExhausted = 2,
  kDiverged = 3,
  kQuota = 4,
  kUsage = 64,
  kIo = 65,
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("GRELU_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw UsageError("GRELU_SEED is not an integer: " + std::string(env));
  return v;
}

// Writes to `path`, or stdout for "" and "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  fn(f);
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

GateSet gates_for(const GReluNetwork& net, const Dataset& ds, const std::string& path) {
  if (path.empty()) return compute_gates(net, ds.X);
  GateSet g = load_gates(path);
  if (g.size() != ds.n()) {
    throw ContractError("gate file covers " + std::to_string(g.size()) +
                        " examples, dataset has " + std::to_string(ds.n()));
  }
  for (const GatePattern& p : g) {
    if (p.masks.size() != net.shape().L + 1 ||
        (!p.masks.empty() && p.masks.front().size() != net.shape().m)) {
      throw ContractError("gate file does not match network shape");
    }
  }
  return g;
}

void check_data(const NetworkShape& s, const Dataset& ds) {
  if (s.d_x != ds.d_x() || s.d_y != ds.d_y()) {
    throw DimensionError("network expects d_x=" + std::to_string(s.d_x) +
                         ", d_y=" + std::to_string(s.d_y) + "; dataset has d_x=" +
                         std::to_string(ds.d_x()) + ", d_y=" + std::to_string(ds.d_y()));
  }
}

// ---- gen-data ----

struct GenDataArgs {
  std::size_t n = 0;
  std::size_t d = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string from_csv;
};

int run_gen_data(const GenDataArgs& a) {
  Dataset ds;
  if (!a.from_csv.empty()) {
    ds = import_csv_file(a.from_csv);
  } else {
    if (a.n == 0 || a.d == 0) throw UsageError("gen-data needs --n and --d (or --from-csv)");
    ds = gen_ackley(a.n, a.d, a.seed.value_or(default_seed()));
  }
  save_dataset(ds, a.out);
  std::cout << "delta=" << num(check_separation(ds, &std::cerr)) << '\n';
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string arch = "grelu";
  std::size_t width = 0;
  std::size_t depth = 0;
  std::string lr = "1e-3";
  std::size_t iters = 1000;
  double target_loss = 0.0;
  std::optional<std::uint64_t> seed;
  std::string log;
  std::size_t log_every = 1;
  std::string out_net;
  std::string out_gates;
  std::string init_net;
  bool deterministic = false;
  bool track_hamming = false;
  bool no_tau = false;
};

TrainConfig train_config(const TrainArgs& a) {
  TrainConfig c;
  c.arch = parse_arch(a.arch);
  if (a.lr == "theoretical") {
    c.eta_theoretical = true;
  } else {
    std::size_t used = 0;
    try {
      c.eta = std::stod(a.lr, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.lr.size() || !(c.eta > 0.0)) {
      throw UsageError("--lr must be a positive number or 'theoretical'");
    }
  }
  c.max_iters = a.iters;
  c.target_loss = a.target_loss;
  c.seed = a.seed.value_or(default_seed());
  c.log_every = a.log_every;
  c.deterministic_reduction = a.deterministic;
  c.track_hamming = a.track_hamming;
  c.track_tau = !a.no_tau;
  c.validate();
  return c;
}

NetworkShape shape_from(const TrainArgs& a, const Dataset& ds) {
  if (a.width == 0) throw UsageError("--width is required unless --init-net is given");
  return NetworkShape{ds.d_x(), ds.d_y(), a.width, a.depth == 0 ? 3 : a.depth};
}

void check_init_shape(const TrainArgs& a, const NetworkShape& s) {
  if ((a.width != 0 && a.width != s.m) || (a.depth != 0 && a.depth != s.L)) {
    throw UsageError("--width/--depth disagree with the --init-net checkpoint");
  }
}

template <class Result>
int finish_train(const TrainArgs& a, const Result& res) {
  emit(a.log, [&](std::ostream& o) { res.log.write_csv(o); });
  if (!a.out_net.empty()) save_network(res.net, a.out_net);
  return res.reason == StopReason::TargetReached ? kOk : kExhausted;
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = train_config(a);
  if (cfg.arch == Arch::ReLU && !a.out_gates.empty()) {
    throw UsageError("--out-gates applies to --arch grelu only");
  }
  const Dataset ds = load_dataset(a.data);
  try {
    if (cfg.arch == Arch::GReLU) {
      GReluNetwork net;
      if (!a.init_net.empty()) {
        net = load_network(a.init_net);
        check_init_shape(a, net.shape());
      } else {
        net = init_network(shape_from(a, ds), cfg.seed);
      }
      check_data(net.shape(), ds);
      const GateSet gates = compute_gates(net, ds.X);
      if (!a.out_gates.empty()) save_gates(gates, a.out_gates);
      return finish_train(a, train(std::move(net), gates, ds, cfg));
    }
    ReluNetwork net;
    if (!a.init_net.empty()) {
      net = load_relu_network(a.init_net);
      check_init_shape(a, net.shape());
    } else {
      net = init_relu_network(shape_from(a, ds), cfg.seed);
    }
    check_data(net.shape(), ds);
    return finish_train(a, train(std::move(net), ds, cfg));
  } catch (const DivergenceError& e) {
    emit(a.log, [&](std::ostream& o) { e.log().write_csv(o); });
    throw;
  }
}

// ---- probe ----

struct ProbeArgs {
  std::string net;
  std::string gates;
  std::string data;
  std::string which = "all";
  std::size_t seeds = 1;
  std::optional<std::uint64_t> seed;
  std::size_t width = 0;
  std::size_t depth = 3;
  double quota = 0.95;
  double theta = 1.0 / 3.0;
  bool trained = false;
  double eta = 1e-3;
  std::string log;
  std::string out;
};

TheoryReport probe_one(const ProbeArgs& a, const GReluNetwork& net, const GateSet& gates,
                       const Dataset& ds) {
  const std::string& w = a.which;
  const bool all = w == "all";
  TheoryReport rep;
  std::optional<TheoryReport> cross;
  auto cross_report = [&]() -> const TheoryReport& {
    if (!cross) cross = cross_term_report(net, gates, ds);
    return *cross;
  };
  if (all || w == "eig") rep.append(eig_bounds_report(net, gates));
  if (all || w == "cross") rep.append(cross_report());
  if (all || w == "overlap") rep.append(gate_stats_report(net, gates, ds));
  if (all || w == "znorm") rep.append(z_norm_report(net, gates, a.theta, a.trained));
  if (all || w == "decomp") {
    GReluNetwork stepped = net;
    std::vector<Matrix> ws = net.weights();
    const std::vector<Matrix> g = all_layer_gradients(net, gates, ds);
    for (std::size_t k = 0; k < ws.size(); ++k) ws[k] -= a.eta * g[k];
    stepped.replace_weights(std::move(ws));
    const bool exact = net.shape().L <= 6;
    const Decomposition d = exact ? decomposition_check(net, stepped, gates, ds, a.eta)
                                  : decomposition_first_order(net, stepped, gates, ds, a.eta);
    for (std::size_t i = 0; i < d.residual.size(); ++i) {
      TheoryRecord r{exact ? "decomp" : "decomp_first_order", {}, i, {}, d.residual[i],
                     1e-10, d.residual[i] <= 1e-10};
      r.asserted = exact;
      rep.records.push_back(r);
    }
  }
  if (all || w == "gradnorm") {
    const SpectralConstants sc = SpectralConstants::of(net.shape());
    rep.append(grad_norm_bound_check(net, gates, ds, sc.beta, gamma_hat(cross_report())));
  }
  if (all || w == "initloss") rep.append(initial_loss_check(net, gates, ds));
  if ((all && !a.log.empty()) || w == "descent") {
    if (a.log.empty()) throw UsageError("--which descent needs --log");
    std::ifstream f(a.log);
    if (!f) throw IoError("cannot open " + a.log);
    const TrainLog log = TrainLog::read_csv(f);
    if (log.rows.empty()) throw FormatError("train log has no rows", 0);
    const double eta = log.rows.front().eta;
    const double alpha = SpectralConstants::of(net.shape()).alpha;
    const double frac = descent_rate_check(log, alpha, net.shape().L, eta);
    rep.records.push_back(TheoryRecord{"descent", {}, {}, {}, frac, 0.95, frac >= 0.95});
  }
  return rep;
}

int run_probe(const ProbeArgs& a) {
  static const char* kWhich[] = {"eig",      "cross",   "overlap",  "znorm", "decomp",
                                 "descent",  "gradnorm", "initloss", "all"};
  if (std::find(std::begin(kWhich), std::end(kWhich), a.which) == std::end(kWhich)) {
    throw UsageError("unknown --which '" + a.which + "'");
  }
  if (a.seeds == 0) throw UsageError("--seeds must be >= 1");
  if (!a.net.empty() && a.seeds > 1) {
    throw UsageError("--seeds > 1 draws fresh networks and cannot be combined with --net");
  }
  if (!a.gates.empty() && a.net.empty()) throw UsageError("--gates needs --net");
  if (!(a.quota >= 0.0 && a.quota <= 1.0)) throw UsageError("--quota must lie in [0, 1]");
  const Dataset ds = load_dataset(a.data);
  const std::uint64_t base = a.seed.value_or(default_seed());

  std::size_t passed = 0;
  std::ostringstream body;
  for (std::size_t s = 0; s < a.seeds; ++s) {
    GReluNetwork net;
    if (!a.net.empty()) {
      net = load_network(a.net);
    } else {
      if (a.width == 0) throw UsageError("probe needs --net or --width");
      net = init_network(NetworkShape{ds.d_x(), ds.d_y(), a.width, a.depth}, base + s);
    }
    check_data(net.shape(), ds);
    const GateSet gates = gates_for(net, ds, a.gates);
    const TheoryReport rep = probe_one(a, net, gates, ds);
    const bool ok = rep.all_pass();
    passed += ok ? 1 : 0;
    if (a.seeds > 1) body << "# seed=" << base + s << " pass=" << (ok ? 1 : 0) << '\n';
    rep.write_csv(body, false);
  }
  const double frac = static_cast<double>(passed) / static_cast<double>(a.seeds);
  const bool met = frac >= a.quota;
  emit(a.out, [&](std::ostream& o) {
    o << "quantity,k,i,j,measured,bound,pass\n" << body.str();
    o << "# passed " << passed << '/' << a.seeds << " quota " << num(a.quota) << ' '
      << (met ? "met" : "missed") << '\n';
  });
  return met ? kOk : kQuota;
}

// ---- convert ----

struct ConvertArgs {
  std::string net;
  std::string gates;
  std::string data;
  std::string out;
  std::string report;
  bool verify = false;
};

int run_convert(const ConvertArgs& a) {
  const GReluNetwork net = load_network(a.net);
  const Dataset ds = load_dataset(a.data);
  check_data(net.shape(), ds);
  const GateSet gates = gates_for(net, ds, a.gates);
  const ReluNetwork relu = grelu_to_relu(net, gates, ds);
  save_network(relu, a.out);
  if (!a.verify) return kOk;
  const EquivalenceReport rep = verify_equivalence(net, gates, relu, ds);
  emit(a.report, [&](std::ostream& o) {
    o << "quantity,k,value\n";
    for (std::size_t k = 0; k < rep.layer_deviation.size(); ++k) {
      o << "layer_deviation," << k << ',' << num(rep.layer_deviation[k]) << '\n';
    }
    o << "max_deviation,," << num(rep.max_deviation) << '\n';
    o << "output_deviation,," << num(rep.output_deviation) << '\n';
    o << "grelu_loss,," << num(rep.grelu_loss) << '\n';
    o << "relu_loss,," << num(rep.relu_loss) << '\n';
    o << "loss_rel_diff,," << num(rep.loss_rel_diff()) << '\n';
    o << "sign_violations,," << rep.sign_violations << '\n';
  });
  if (rep.max_deviation > 1e-6 || rep.sign_violations > 0) {
    throw ContractError("converted network deviates: max " + num(rep.max_deviation) +
                        ", sign violations " + std::to_string(rep.sign_violations));
  }
  return kOk;
}

// ---- ntk ----

struct NtkArgs {
  std::string net;
  std::string init;
  std::string data;
  std::size_t p = 1;
  std::string mode = "kernel";
  std::string out;
};

int run_ntk(const NtkArgs& a) {
  if (a.mode != "kernel" && a.mode != "ratio" && a.mode != "drift") {
    throw UsageError("--mode must be kernel, ratio or drift");
  }
  if (a.mode != "kernel" && a.init.empty()) {
    throw UsageError("--mode " + a.mode + " needs --init");
  }
  const GReluNetwork net = load_network(a.net);
  const Dataset ds = load_dataset(a.data);
  check_data(net.shape(), ds);
  if (a.mode == "kernel") {
    const Matrix k = ntk_kernel(net, compute_gates(net, ds.X), ds, a.p);
    emit(a.out, [&](std::ostream& o) { write_kernel_csv(o, k, a.p, net.shape().m, net.shape().L); });
    return kOk;
  }
  GReluNetwork init = load_network(a.init);
  if (!(init.shape() == net.shape()) || !(*init.frozen() == *net.frozen())) {
    throw ContractError("--init and --net do not share shape and frozen layers");
  }
  if (a.mode == "ratio") {
    emit(a.out, [&](std::ostream& o) {
      o << "i,ratio\n";
      for (std::size_t i = 0; i < ds.n(); ++i) {
        o << i << ',' << num(ntk_ratio(init, net, ds.X.row(i), a.p)) << '\n';
      }
    });
    return kOk;
  }
  const GateSet gates = compute_gates(init, ds.X);
  const double drift = kernel_drift(init, net, gates, ds, a.p);
  emit(a.out, [&](std::ostream& o) { o << "quantity,value\nkernel_drift," << num(drift) << '\n'; });
  return kOk;
}

// ---- sweep ----

struct SweepArgs {
  std::string config;
  std::size_t jobs = 1;
  bool print_config = false;
};

int run_sweep_cmd(const SweepArgs& a) {
  const SweepConfig cfg = SweepConfig::from_flat(FlatConfig::load(a.config));
  if (a.print_config) {
    cfg.to_flat().write(std::cout);
    return kOk;
  }
  if (a.jobs == 0) throw UsageError("--jobs must be >= 1");
  const std::vector<SweepRun> runs = run_sweep(cfg, a.jobs);
  emit(cfg.csv, [&](std::ostream& o) { write_sweep_csv(o, runs); });
  if (!cfg.svg.empty()) {
    emit(cfg.svg, [&](std::ostream& o) { write_sweep_svg(o, runs, cfg.log_y); });
  }
  return kOk;
}

void print_error(const std::string& kind, const std::string& what) {
  std::cerr << "ERROR: " << kind << ": " << what << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gated ReLU network experiments"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--n", gd.n, "Number of examples");
  gen->add_option("--d", gd.d, "Input dimension");
  gen->add_option("--seed", gd.seed, "Seed (default $GRELU_SEED or 0)");
  gen->add_option("--out", gd.out, "Output dataset file")->required();
  gen->add_option("--from-csv", gd.from_csv, "Import a CSV instead of generating");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train by full-batch gradient descent");
  trn->add_option("--data", tr.data, "Dataset file")->required();
  trn->add_option("--arch", tr.arch, "grelu or relu")
      ->check(CLI::IsMember({"grelu", "relu"}));
  trn->add_option("--width", tr.width, "Hidden width m");
  trn->add_option("--depth", tr.depth, "Number of trained layers L (default 3)");
  trn->add_option("--lr", tr.lr, "Step size or 'theoretical'");
  trn->add_option("--iters", tr.iters, "Iteration budget");
  trn->add_option("--target-loss", tr.target_loss, "Stop once loss <= target");
  trn->add_option("--seed", tr.seed, "Seed (default $GRELU_SEED or 0)");
  trn->add_option("--log", tr.log, "Train log CSV (default stdout)");
  trn->add_option("--log-every", tr.log_every, "Log period in iterations");
  trn->add_option("--out-net", tr.out_net, "Write the trained checkpoint");
  trn->add_option("--out-gates", tr.out_gates, "Write the gate cache (grelu)");
  trn->add_option("--init-net", tr.init_net, "Start from a checkpoint");
  trn->add_flag("--deterministic", tr.deterministic, "Zero the wall-clock column");
  trn->add_flag("--track-hamming", tr.track_hamming, "Record gate drift for grelu runs");
  trn->add_flag("--no-tau", tr.no_tau, "Skip the spectral drift column");

  ProbeArgs pr;
  auto* prb = app.add_subcommand("probe", "Check theoretical quantities");
  prb->add_option("--net", pr.net, "GReLU checkpoint");
  prb->add_option("--gates", pr.gates, "Gate cache (default: recompute)");
  prb->add_option("--data", pr.data, "Dataset file")->required();
  prb->add_option("--which", pr.which,
                  "eig, cross, overlap, znorm, decomp, descent, gradnorm, initloss or all");
  prb->add_option("--seeds", pr.seeds, "Fresh initializations to probe");
  prb->add_option("--seed", pr.seed, "First seed (default $GRELU_SEED or 0)");
  prb->add_option("--width", pr.width, "Width for fresh initializations");
  prb->add_option("--depth", pr.depth, "Depth for fresh initializations");
  prb->add_option("--quota", pr.quota, "Fraction of seeds that must pass");
  prb->add_option("--theta", pr.theta, "Z-norm parameter in (0, 1/2)");
  prb->add_flag("--trained", pr.trained, "Use the trained-weights Z bound");
  prb->add_option("--eta", pr.eta, "Step size for the decomposition probe");
  prb->add_option("--log", pr.log, "Train log for the descent probe");
  prb->add_option("--out", pr.out, "Report CSV (default stdout)");

  ConvertArgs cv;
  auto* cnv = app.add_subcommand("convert", "Build the equivalent ReLU network");
  cnv->add_option("--net", cv.net, "GReLU checkpoint")->required();
  cnv->add_option("--gates", cv.gates, "Gate cache (default: recompute)");
  cnv->add_option("--data", cv.data, "Dataset file")->required();
  cnv->add_option("--out", cv.out, "Output ReLU checkpoint")->required();
  cnv->add_flag("--verify", cv.verify, "Check footprints and losses");
  cnv->add_option("--report", cv.report, "Deviation report CSV (default stdout)");

  NtkArgs nk;
  auto* ntk = app.add_subcommand("ntk", "Neural tangent kernel quantities");
  ntk->add_option("--net", nk.net, "GReLU checkpoint")->required();
  ntk->add_option("--init", nk.init, "Checkpoint at initialization (ratio, drift)");
  ntk->add_option("--data", nk.data, "Dataset file")->required();
  ntk->add_option("--p", nk.p, "Output index, 1-based");
  ntk->add_option("--mode", nk.mode, "kernel, ratio or drift");
  ntk->add_option("--out", nk.out, "Output CSV (default stdout)");

  SweepArgs sw;
  auto* swp = app.add_subcommand("sweep", "Run a width x seed x arch grid");
  swp->add_option("--config", sw.config, "Config file")->required();
  swp->add_option("--jobs", sw.jobs, "Worker threads");
  swp->add_flag("--print-config", sw.print_config, "Echo the parsed config and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*gen) return run_gen_data(gd);
    if (*trn) return run_train(tr);
    if (*prb) return run_probe(pr);
    if (*cnv) return run_convert(cv);
    if (*ntk) return run_ntk(nk);
    if (*swp) return run_sweep_cmd(sw);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    return kUsage;
  } catch (const DivergenceError& e) {
    print_error("diverged", e.what());
    return kDiverged;
  } catch (const IoError& e) {
    print_error("io", e.what());
    return kIo;
  } catch (const FormatError& e) {
    print_error("format", e.what());
    return kIo;
  } catch (const Error& e) {
    print_error("runtime", e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kRuntime;
  }
  return kUsage;
}
