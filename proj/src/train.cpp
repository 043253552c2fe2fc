#include "grelu/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "grelu/linalg.hpp"
#include "grelu/propagation.hpp"

namespace grelu {

namespace {

void check_gate_count(const GateSet& gates, const Dataset& ds) {
  if (gates.size() != ds.n()) {
    throw ContractError("have gates for " + std::to_string(gates.size()) +
                        " examples, dataset has " + std::to_string(ds.n()));
  }
}

void check_dims(const NetworkShape& s, const Dataset& ds) {
  if (ds.d_x() != s.d_x || ds.d_y() != s.d_y) {
    throw DimensionError("dataset dims (" + std::to_string(ds.d_x()) + ", " +
                         std::to_string(ds.d_y()) + ") do not match network (" +
                         std::to_string(s.d_x) + ", " + std::to_string(s.d_y) + ")");
  }
}

struct Eval {
  double loss = 0.0;
  std::vector<Matrix> grads;
  GateSet masks;  // ReLU only
};

Eval evaluate(const GReluNetwork& net, const GateSet& gates, const Dataset& ds) {
  const Trace t = forward_batch(net, gates, ds.X);
  const Matrix r = residuals(t, ds.Y);
  Eval e;
  e.loss = half_squared_norm(r);
  e.grads = layer_gradients(t, backward_signals(net.weights(), net.B(), gates, r));
  return e;
}

Eval evaluate(const ReluNetwork& relu, const Dataset& ds) {
  Eval e;
  const Trace t = forward_batch(relu, ds.X, &e.masks);
  const Matrix r = residuals(t, ds.Y);
  e.loss = half_squared_norm(r);
  e.grads = layer_gradients(
      t, backward_signals(relu.weights(), relu.B(), e.masks, r,
                          relu.readout() == ReadoutMode::Rectified));
  return e;
}

double total_norm(const std::vector<Matrix>& g) {
  double s = 0.0;
  for (const Matrix& m : g) {
    const double f = frobenius_norm(m);
    s += f * f;
  }
  return std::sqrt(s);
}

double diff_norm(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double f = frobenius_norm(a[k] - b[k]);
    s += f * f;
  }
  return std::sqrt(s);
}

double max_drift(const std::vector<Matrix>& w, const std::vector<Matrix>& w0) {
  double tau = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    tau = std::max(tau, spectral_norm(w[k] - w0[k]));
  }
  return tau;
}

std::size_t gated_layers(const ReluNetwork& relu) {
  return relu.readout() == ReadoutMode::Rectified ? relu.shape().L + 1 : relu.shape().L;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string describe(const char* arch, const NetworkShape& s, const Dataset& ds,
                     const TrainConfig& cfg, double eta) {
  std::ostringstream os;
  os << "arch=" << arch << " n=" << ds.n() << " d_x=" << s.d_x << " d_y=" << s.d_y
     << " m=" << s.m << " L=" << s.L << " seed=" << cfg.seed << " eta=" << fmt(eta)
     << " eta_mode=" << (cfg.eta_theoretical ? "theoretical" : "value");
  return os.str();
}

// Shared descent loop. `eval(weights)` returns loss and gradients at the given
// layers; `drift(eval, t, at_log)` returns the Hamming column for step t and
// is also called on unlogged steps so it can track the previous masks.
template <class Net, class EvalFn, class DriftFn>
TrainResult<Net> descend(Net net, const TrainConfig& cfg, double eta,
                         std::string header, bool with_hamming, EvalFn eval,
                         DriftFn drift) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  TrainResult<Net> res;
  res.log.comments.push_back(std::move(header));
  res.log.has_hamming = with_hamming;

  const std::vector<Matrix> w0 = net.weights();
  Eval cur = eval(net);
  const double loss0 = cur.loss;
  double tau = 0.0;

  auto make_row = [&](std::size_t t, const Eval& e, double tdiff, bool at_log) {
    TrainRow row;
    row.iter = t;
    row.loss = e.loss;
    row.grad_norm = total_norm(e.grads);
    row.grad_tdiff = tdiff;
    if (cfg.track_tau) {
      if (at_log && t > 0) tau = std::max(tau, max_drift(net.weights(), w0));
      row.tau = tau;
    } else {
      row.tau = std::numeric_limits<double>::quiet_NaN();
    }
    row.eta = eta;
    row.wall_ms =
        cfg.deterministic_reduction
            ? 0.0
            : std::chrono::duration<double, std::milli>(clock::now() - start).count();
    if (with_hamming) row.hamming = drift(e, t, true);
    return row;
  };

  res.log.rows.push_back(make_row(0, cur, 0.0, true));
  if (cur.loss <= cfg.target_loss) {
    res.reason = StopReason::TargetReached;
    res.net = std::move(net);
    return res;
  }
  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    std::vector<Matrix> w = net.weights();
    for (std::size_t k = 0; k < w.size(); ++k) w[k].axpy(-eta, cur.grads[k]);
    net.replace_weights(std::move(w));
    Eval next = eval(net);
    const double tdiff = diff_norm(next.grads, cur.grads);
    const bool diverged = !std::isfinite(next.loss) ||
                          (loss0 > 0.0 && next.loss > cfg.divergence_factor * loss0);
    const bool reached = next.loss <= cfg.target_loss;
    const bool log_now =
        diverged || reached || t == cfg.max_iters || t % cfg.log_every == 0;
    cur = std::move(next);
    if (log_now) res.log.rows.push_back(make_row(t, cur, tdiff, true));
    else if (with_hamming) drift(cur, t, false);
    res.iters = t;
    if (diverged) throw DivergenceError(t, cur.loss, std::move(res.log));
    if (reached) {
      res.reason = StopReason::TargetReached;
      break;
    }
  }
  res.net = std::move(net);
  return res;
}

}  // namespace

double loss(const GReluNetwork& net, const GateSet& gates, const Dataset& ds) {
  check_dims(net.shape(), ds);
  check_gate_count(gates, ds);
  return half_squared_norm(residuals(forward_batch(net, gates, ds.X), ds.Y));
}

double loss(const ReluNetwork& relu, const Dataset& ds) {
  check_dims(relu.shape(), ds);
  return half_squared_norm(residuals(forward_batch(relu, ds.X, nullptr), ds.Y));
}

std::vector<Matrix> all_layer_gradients(const GReluNetwork& net, const GateSet& gates,
                                        const Dataset& ds) {
  check_dims(net.shape(), ds);
  check_gate_count(gates, ds);
  return evaluate(net, gates, ds).grads;
}

std::vector<Matrix> all_layer_gradients(const ReluNetwork& relu, const Dataset& ds) {
  check_dims(relu.shape(), ds);
  return evaluate(relu, ds).grads;
}

Matrix layer_gradient(const GReluNetwork& net, const GateSet& gates, const Dataset& ds,
                      std::size_t k) {
  if (k < 1 || k > net.shape().L) {
    throw ContractError("layer " + std::to_string(k) + " outside [1, " +
                        std::to_string(net.shape().L) + "]");
  }
  return all_layer_gradients(net, gates, ds)[k - 1];
}

double theoretical_lr(const NetworkShape& shape, std::size_t n) {
  if (n == 0) throw ContractError("theoretical_lr: n must be >= 1");
  const double nn = static_cast<double>(n);
  const double L = static_cast<double>(shape.L);
  return static_cast<double>(shape.d_x) /
         (nn * nn * nn * nn * L * L * L * static_cast<double>(shape.d_y));
}

void TrainConfig::validate() const {
  if (!eta_theoretical && (!(eta >= 0.0) || !std::isfinite(eta))) {
    throw ContractError("learning rate must be finite and >= 0");
  }
  if (!(target_loss >= 0.0)) throw ContractError("target loss must be >= 0");
  if (log_every == 0) throw ContractError("log_every must be >= 1");
  if (!(divergence_factor > 1.0)) throw ContractError("divergence factor must be > 1");
}

TrainResult<GReluNetwork> train(GReluNetwork net, const GateSet& gates,
                                const Dataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  check_dims(net.shape(), ds);
  check_gate_count(gates, ds);
  const NetworkShape shape = net.shape();
  const double eta = cfg.eta_theoretical ? theoretical_lr(shape, ds.n()) : cfg.eta;
  GateSet previous = gates;
  const GReluNetwork* live = nullptr;
  auto eval = [&](const GReluNetwork& n) {
    live = &n;
    return evaluate(n, gates, ds);
  };
  // Gates are rebuilt from the live network, so a nonzero value would expose
  // any dependence of the masks on W.
  auto drift = [&](const Eval&, std::size_t, bool at_log) {
    if (!at_log) return 0.0;
    GateSet now = compute_gates(*live, ds.X);
    const double d = mask_drift(previous, now, shape.L + 1);
    previous = std::move(now);
    return d;
  };
  return descend(std::move(net), cfg, eta, describe("grelu", shape, ds, cfg, eta),
                 cfg.track_hamming, eval, drift);
}

TrainResult<ReluNetwork> train(ReluNetwork relu, const Dataset& ds,
                               const TrainConfig& cfg) {
  cfg.validate();
  check_dims(relu.shape(), ds);
  const double eta = cfg.eta_theoretical ? theoretical_lr(relu.shape(), ds.n()) : cfg.eta;
  const std::size_t layers = gated_layers(relu);
  GateSet previous;
  auto eval = [&](const ReluNetwork& n) { return evaluate(n, ds); };
  auto drift = [&](const Eval& e, std::size_t t, bool) {
    const double d = t == 0 ? 0.0 : mask_drift(previous, e.masks, layers);
    previous = e.masks;
    return d;
  };
  const NetworkShape shape = relu.shape();
  return descend(std::move(relu), cfg, eta, describe("relu", shape, ds, cfg, eta), true,
                 eval, drift);
}

double mask_drift(const GateSet& a, const GateSet& b, std::size_t layers) {
  if (a.size() != b.size()) throw DimensionError("mask_drift: example counts differ");
  if (a.empty() || layers == 0) return 0.0;
  std::size_t flips = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].masks.size() < layers || b[i].masks.size() < layers) {
      throw DimensionError("mask_drift: too few layers");
    }
    for (std::size_t k = 0; k < layers; ++k) {
      if (a[i].masks[k].size() != b[i].masks[k].size()) {
        throw DimensionError("mask_drift: mask widths differ");
      }
      flips += a[i].masks[k].count_xor(b[i].masks[k]);
      total += a[i].masks[k].size();
    }
  }
  return static_cast<double>(flips) / static_cast<double>(total);
}

double hamming_activation_drift(const ReluNetwork& a, const ReluNetwork& b,
                                const Dataset& ds) {
  if (a.shape() != b.shape() || a.readout() != b.readout()) {
    throw DimensionError("hamming drift: networks differ in shape");
  }
  check_dims(a.shape(), ds);
  GateSet ma;
  GateSet mb;
  forward_batch(a, ds.X, &ma);
  forward_batch(b, ds.X, &mb);
  return mask_drift(ma, mb, gated_layers(a));
}

double hamming_activation_drift(const GReluNetwork& a, const GReluNetwork& b,
                                const Dataset& ds) {
  if (a.shape() != b.shape()) throw DimensionError("hamming drift: networks differ in shape");
  check_dims(a.shape(), ds);
  return mask_drift(compute_gates(a, ds.X), compute_gates(b, ds.X), a.shape().L + 1);
}

void TrainLog::write_csv(std::ostream& out) const {
  for (const std::string& c : comments) out << "# " << c << '\n';
  out << "iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms";
  if (has_hamming) out << ",hamming";
  out << '\n';
  for (const TrainRow& r : rows) {
    out << r.iter << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm) << ','
        << fmt(r.grad_tdiff) << ',' << fmt(r.tau) << ',' << fmt(r.eta) << ','
        << fmt(r.wall_ms);
    if (has_hamming) out << ',' << fmt(r.hamming.value_or(0.0));
    out << '\n';
  }
}

TrainLog TrainLog::read_csv(std::istream& in) {
  TrainLog log;
  std::string line;
  std::uint64_t offset = 0;
  bool header = false;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      log.comments.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!header) {
      if (line == "iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms") {
        log.has_hamming = false;
      } else if (line == "iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms,hamming") {
        log.has_hamming = true;
      } else {
        throw FormatError("train log: unexpected header", at);
      }
      header = true;
      continue;
    }
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* stop = nullptr;
      const double x = std::strtod(cell.c_str(), &stop);
      if (cell.empty() || *stop != '\0') throw FormatError("train log: bad cell", at);
      v.push_back(x);
    }
    if (v.size() != (log.has_hamming ? 8u : 7u)) {
      throw FormatError("train log: wrong column count", at);
    }
    TrainRow r;
    r.iter = static_cast<std::size_t>(v[0]);
    r.loss = v[1];
    r.grad_norm = v[2];
    r.grad_tdiff = v[3];
    r.tau = v[4];
    r.eta = v[5];
    r.wall_ms = v[6];
    if (log.has_hamming) r.hamming = v[7];
    log.rows.push_back(r);
  }
  if (!header) throw FormatError("train log: missing header", offset);
  return log;
}

}  // namespace grelu
