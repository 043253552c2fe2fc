#include "grelu/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <tuple>

#include <omp.h>

#include "grelu/data.hpp"
#include "grelu/error.hpp"
#include "grelu/model.hpp"
#include "grelu/svg.hpp"

namespace grelu {

namespace {

const std::vector<std::string> kKnownKeys = {
    "data.n",          "data.d",         "data.seed",     "train.depth",
    "train.lr",        "train.iters",    "train.target_loss",
    "train.log_every", "train.deterministic", "grid.widths", "grid.seeds",
    "grid.arches",     "output.csv",     "output.svg",    "output.log_y"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::optional<std::uint64_t> parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

bool parse_bool(const FlatConfig& f, const std::string& key, bool fallback) {
  const auto v = f.get_uint(key, fallback ? 1 : 0);
  if (v > 1) throw FormatError(key + " must be 0 or 1", 0);
  return v == 1;
}

}  // namespace

const char* arch_name(Arch a) { return a == Arch::GReLU ? "grelu" : "relu"; }

Arch parse_arch(const std::string& s) {
  if (s == "grelu") return Arch::GReLU;
  if (s == "relu") return Arch::ReLU;
  throw ContractError("unknown architecture '" + s + "' (expected grelu or relu)");
}

const char* status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Target: return "target";
    case RunStatus::Exhausted: return "exhausted";
    case RunStatus::Diverged: return "diverged";
  }
  return "?";
}

SweepConfig SweepConfig::from_flat(const FlatConfig& f) {
  const auto unknown = f.unknown_keys(kKnownKeys);
  if (!unknown.empty()) throw FormatError("unknown config key '" + unknown.front() + "'", 0);
  SweepConfig c;
  c.n = f.get_uint("data.n", c.n);
  c.d = f.get_uint("data.d", c.d);
  c.data_seed = f.get_uint("data.seed", c.data_seed);
  c.depth = f.get_uint("train.depth", c.depth);
  c.lr = f.get_string("train.lr", c.lr);
  c.iters = f.get_uint("train.iters", c.iters);
  c.target_loss = f.get_double("train.target_loss", c.target_loss);
  c.log_every = f.get_uint("train.log_every", c.log_every);
  c.deterministic = parse_bool(f, "train.deterministic", c.deterministic);
  c.widths = f.get_list("grid.widths");
  for (const auto& s : f.get_list("grid.seeds")) {
    const auto v = parse_u64(s);
    if (!v) throw FormatError("grid.seeds: not an integer '" + s + "'", 0);
    c.seeds.push_back(*v);
  }
  for (const auto& a : f.get_list("grid.arches")) {
    try {
      c.arches.push_back(parse_arch(a));
    } catch (const ContractError& e) {
      throw FormatError(e.what(), 0);
    }
  }
  c.csv = f.get_string("output.csv", "");
  c.svg = f.get_string("output.svg", "");
  c.log_y = parse_bool(f, "output.log_y", c.log_y);
  if (c.lr != "theoretical") {
    char* stop = nullptr;
    const double eta = std::strtod(c.lr.c_str(), &stop);
    if (c.lr.empty() || *stop != '\0' || !(eta > 0.0) || !std::isfinite(eta)) {
      throw FormatError("train.lr must be positive or 'theoretical'", 0);
    }
  }
  for (const auto& w : c.widths) {
    try {
      (void)c.resolve_width(w);
    } catch (const ContractError& e) {
      throw FormatError(e.what(), 0);
    }
  }
  return c;
}

FlatConfig SweepConfig::to_flat() const {
  FlatConfig f;
  f.set("data.n", std::to_string(n));
  f.set("data.d", std::to_string(d));
  f.set("data.seed", std::to_string(data_seed));
  f.set("train.depth", std::to_string(depth));
  f.set("train.lr", lr);
  f.set("train.iters", std::to_string(iters));
  f.set("train.target_loss", num(target_loss));
  f.set("train.log_every", std::to_string(log_every));
  f.set("train.deterministic", deterministic ? "1" : "0");
  f.set("grid.widths", join(widths));
  f.set("grid.seeds", join(seeds));
  std::vector<std::string> names;
  for (Arch a : arches) names.emplace_back(arch_name(a));
  f.set("grid.arches", join(names));
  f.set("output.csv", csv);
  f.set("output.svg", svg);
  f.set("output.log_y", log_y ? "1" : "0");
  return f;
}

std::size_t SweepConfig::resolve_width(const std::string& token) const {
  if (token == "nL") return n * depth;
  if (token == "n2L") return n * n * depth;
  const auto w = parse_u64(token);
  if (!w) throw ContractError("width must be an integer, nL or n2L, got '" + token + "'");
  if (*w == 0) throw ContractError("width must be positive");
  return *w;
}

std::vector<SweepRun> run_sweep(const SweepConfig& cfg, std::size_t jobs) {
  struct Point {
    Arch arch;
    std::size_t width;
    std::uint64_t seed;
  };
  std::vector<Point> points;
  for (Arch a : cfg.arches) {
    for (const auto& w : cfg.widths) {
      for (auto s : cfg.seeds) points.push_back({a, cfg.resolve_width(w), s});
    }
  }
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return std::tie(a.arch, a.width, a.seed) < std::tie(b.arch, b.width, b.seed);
  });
  std::vector<SweepRun> runs(points.size());
  if (points.empty()) return runs;

  const Dataset ds = gen_ackley(cfg.n, cfg.d, cfg.data_seed);
  TrainConfig base;
  base.eta_theoretical = cfg.lr == "theoretical";
  if (!base.eta_theoretical) base.eta = std::stod(cfg.lr);
  base.max_iters = cfg.iters;
  base.target_loss = cfg.target_loss;
  base.log_every = cfg.log_every;
  base.deterministic_reduction = cfg.deterministic;
  base.track_hamming = true;

  auto run_one = [&](std::size_t idx) {
    const Point& p = points[idx];
    SweepRun& out = runs[idx];
    out.arch = p.arch;
    out.width = p.width;
    out.seed = p.seed;
    TrainConfig tc = base;
    tc.arch = p.arch;
    tc.seed = p.seed;
    const NetworkShape shape{cfg.d, 1, p.width, cfg.depth};
    try {
      if (p.arch == Arch::GReLU) {
        GReluNetwork net = init_network(shape, p.seed);
        const GateSet gates = compute_gates(net, ds.X);
        auto res = train(std::move(net), gates, ds, tc);
        out.log = std::move(res.log);
        out.status = res.reason == StopReason::TargetReached ? RunStatus::Target
                                                             : RunStatus::Exhausted;
      } else {
        auto res = train(init_relu_network(shape, p.seed), ds, tc);
        out.log = std::move(res.log);
        out.status = res.reason == StopReason::TargetReached ? RunStatus::Target
                                                             : RunStatus::Exhausted;
      }
    } catch (const DivergenceError& e) {
      out.log = e.log();
      out.status = RunStatus::Diverged;
    }
  };

  jobs = std::max<std::size_t>(1, std::min(jobs, points.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_one(i);
    return runs;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      omp_set_num_threads(1);
      for (std::size_t i = next++; i < points.size(); i = next++) {
        try {
          run_one(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return runs;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRun>& runs) {
  out << "arch,width,seed,status,iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms,hamming\n";
  for (const SweepRun& r : runs) {
    for (const TrainRow& row : r.log.rows) {
      out << arch_name(r.arch) << ',' << r.width << ',' << r.seed << ','
          << status_name(r.status) << ',' << row.iter << ',' << num(row.loss) << ','
          << num(row.grad_norm) << ',' << num(row.grad_tdiff) << ',' << num(row.tau) << ','
          << num(row.eta) << ',' << num(row.wall_ms) << ',';
      if (row.hamming) out << num(*row.hamming);
      out << '\n';
    }
  }
}

void write_sweep_svg(std::ostream& out, const std::vector<SweepRun>& runs, bool log_y) {
  std::vector<Series> series;
  for (const SweepRun& r : runs) {
    Series s;
    s.label = std::string(arch_name(r.arch)) + " m=" + std::to_string(r.width) +
              " s=" + std::to_string(r.seed);
    for (const TrainRow& row : r.log.rows) {
      s.x.push_back(static_cast<double>(row.iter));
      s.y.push_back(row.loss);
    }
    series.push_back(std::move(s));
  }
  ChartOptions opts;
  opts.title = "training loss";
  opts.log_y = log_y;
  write_svg_chart(out, series, opts);
}

}  // namespace grelu
