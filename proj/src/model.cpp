#include "grelu/model.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <string>

#include "grelu/error.hpp"
#include "grelu/kernels.hpp"

namespace grelu {

namespace {

std::string dims(const Matrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void expect_shape(const Matrix& a, std::size_t rows, std::size_t cols,
                  const std::string& what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw DimensionError(what + " is " + dims(a) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void check_frozen(const NetworkShape& s, const FrozenLayers& f, bool need_psi) {
  expect_shape(f.C, s.m, s.d_x, "C");
  expect_shape(f.B, s.d_y, s.m, "B");
  if (need_psi && f.Psi.size() != s.L) {
    throw DimensionError("expected " + std::to_string(s.L) + " Psi layers, got " +
                         std::to_string(f.Psi.size()));
  }
  for (std::size_t k = 0; k < f.Psi.size(); ++k) {
    expect_shape(f.Psi[k], s.m, s.m, "Psi_" + std::to_string(k + 1));
  }
}

void check_weights(const NetworkShape& s, const std::vector<Matrix>& w) {
  if (w.size() != s.L) {
    throw DimensionError("expected " + std::to_string(s.L) + " trained layers, got " +
                         std::to_string(w.size()));
  }
  for (std::size_t k = 0; k < w.size(); ++k) {
    expect_shape(w[k], s.m, s.m, "W_" + std::to_string(k + 1));
  }
}

void check_layer(std::size_t k, std::size_t L) {
  if (k < 1 || k > L) {
    throw ContractError("layer " + std::to_string(k) + " outside [1, " +
                        std::to_string(L) + "]");
  }
}

void check_input(std::span<const double> x, std::size_t d_x) {
  if (x.size() != d_x) {
    throw DimensionError("input has length " + std::to_string(x.size()) +
                        ", expected " + std::to_string(d_x));
  }
  if (!all_finite(x)) throw InputError("input has non-finite entries");
}

void warn_norm(std::span<const double> x) {
  static std::once_flag once;
  if (std::abs(norm2(x) - 1.0) > 1e-6) {
    std::call_once(once, [] {
      std::cerr << "warning: gates computed for an input that is not unit norm\n";
    });
  }
}

void check_gates(const GatePattern& g, const NetworkShape& s) {
  if (g.masks.size() != s.L + 1) {
    throw ContractError("gate pattern has " + std::to_string(g.masks.size()) +
                        " masks, expected " + std::to_string(s.L + 1));
  }
  for (const BitMask& b : g.masks) {
    if (b.size() != s.m) throw ContractError("gate mask length != width");
  }
}

void apply_mask(std::span<double> v, const BitMask& mask) {
  for (std::size_t s = 0; s < v.size(); ++s) {
    if (!mask.test(s)) v[s] = 0.0;
  }
}

BitMask positive_mask(std::span<const double> z) {
  BitMask mask(z.size());
  for (std::size_t s = 0; s < z.size(); ++s) {
    if (z[s] > 0.0) mask.set(s);
  }
  return mask;
}

void copy_into(const Vector& src, std::span<double> dst) {
  std::copy(src.begin(), src.end(), dst.begin());
}

}  // namespace

void NetworkShape::validate() const {
  if (d_x == 0 || d_y == 0 || m == 0 || L == 0) {
    throw DimensionError("network shape fields must all be >= 1 (d_x=" +
                         std::to_string(d_x) + " d_y=" + std::to_string(d_y) +
                         " m=" + std::to_string(m) + " L=" + std::to_string(L) + ")");
  }
}

GReluNetwork::GReluNetwork(NetworkShape shape,
                           std::shared_ptr<const FrozenLayers> frozen,
                           std::vector<Matrix> weights)
    : shape_(shape), frozen_(std::move(frozen)), weights_(std::move(weights)) {
  shape_.validate();
  if (!frozen_) throw ContractError("network without frozen layers");
  check_frozen(shape_, *frozen_, true);
  check_weights(shape_, weights_);
}

const Matrix& GReluNetwork::Psi(std::size_t k) const {
  check_layer(k, shape_.L);
  return frozen_->Psi[k - 1];
}

const Matrix& GReluNetwork::W(std::size_t k) const {
  check_layer(k, shape_.L);
  return weights_[k - 1];
}

void GReluNetwork::replace_weights(std::vector<Matrix> weights) {
  check_weights(shape_, weights);
  weights_ = std::move(weights);
}

bool GReluNetwork::operator==(const GReluNetwork& other) const {
  if (shape_ != other.shape_ || weights_ != other.weights_) return false;
  if (frozen_ == other.frozen_) return true;
  return frozen_ && other.frozen_ && *frozen_ == *other.frozen_;
}

ReluNetwork::ReluNetwork(NetworkShape shape,
                         std::shared_ptr<const FrozenLayers> frozen,
                         std::vector<Matrix> weights, ReadoutMode readout)
    : shape_(shape),
      frozen_(std::move(frozen)),
      weights_(std::move(weights)),
      readout_(readout) {
  shape_.validate();
  if (!frozen_) throw ContractError("network without frozen layers");
  check_frozen(shape_, *frozen_, false);
  check_weights(shape_, weights_);
}

const Matrix& ReluNetwork::Wt(std::size_t k) const {
  check_layer(k, shape_.L);
  return weights_[k - 1];
}

void ReluNetwork::replace_weights(std::vector<Matrix> weights) {
  check_weights(shape_, weights);
  weights_ = std::move(weights);
}

bool ReluNetwork::operator==(const ReluNetwork& other) const {
  if (shape_ != other.shape_ || readout_ != other.readout_ ||
      weights_ != other.weights_) {
    return false;
  }
  if (frozen_->C != other.frozen_->C || frozen_->B != other.frozen_->B) return false;
  return true;
}

std::vector<const BitMask*> layer_masks(const GateSet& gates, std::size_t k) {
  std::vector<const BitMask*> out;
  out.reserve(gates.size());
  for (const GatePattern& g : gates) out.push_back(&g.masks.at(k));
  return out;
}

namespace {

std::shared_ptr<FrozenLayers> init_readout(const NetworkShape& shape,
                                           std::uint64_t seed) {
  auto frozen = std::make_shared<FrozenLayers>();
  frozen->C = gaussian_matrix(shape.m, shape.d_x, 2.0 / static_cast<double>(shape.d_x),
                              RngStream(seed, streams::kC));
  frozen->B = gaussian_matrix(shape.d_y, shape.m, 2.0 / static_cast<double>(shape.d_y),
                              RngStream(seed, streams::kB));
  return frozen;
}

std::vector<Matrix> init_hidden(const NetworkShape& shape, std::uint64_t seed,
                                std::uint64_t base) {
  std::vector<Matrix> layers;
  layers.reserve(shape.L);
  const double var = 2.0 / static_cast<double>(shape.m);
  for (std::size_t k = 1; k <= shape.L; ++k) {
    layers.push_back(gaussian_matrix(shape.m, shape.m, var, RngStream(seed, base + k)));
  }
  return layers;
}

}  // namespace

GReluNetwork init_network(const NetworkShape& shape, std::uint64_t seed) {
  shape.validate();
  auto frozen = init_readout(shape, seed);
  frozen->Psi = init_hidden(shape, seed, streams::kPsiBase);
  return GReluNetwork(shape, std::move(frozen), init_hidden(shape, seed, streams::kWBase));
}

ReluNetwork init_relu_network(const NetworkShape& shape, std::uint64_t seed,
                              ReadoutMode readout) {
  shape.validate();
  return ReluNetwork(shape, init_readout(shape, seed),
                     init_hidden(shape, seed, streams::kWBase), readout);
}

GatePattern compute_gates(const GReluNetwork& net, std::span<const double> x) {
  check_input(x, net.shape().d_x);
  warn_norm(x);
  GatePattern g;
  g.masks.reserve(net.shape().L + 1);
  Vector z = kernels::gemv(net.C(), x);
  for (std::size_t k = 0;; ++k) {
    g.masks.push_back(positive_mask(z));
    for (double& v : z) v = std::max(v, 0.0);
    if (k == net.shape().L) break;
    z = kernels::gemv(net.Psi(k + 1), z);
  }
  return g;
}

GateSet compute_gates(const GReluNetwork& net, const Matrix& X) {
  if (X.cols() != net.shape().d_x) {
    throw ContractError("inputs have " + std::to_string(X.cols()) +
                        " columns, expected " + std::to_string(net.shape().d_x));
  }
  if (!all_finite(X.flat())) throw InputError("inputs have non-finite entries");
  for (std::size_t i = 0; i < X.rows(); ++i) warn_norm(X.row(i));
  const std::size_t n = X.rows();
  GateSet gates(n);
  for (auto& g : gates) g.masks.reserve(net.shape().L + 1);
  Matrix z = kernels::gemm_nt(X, net.C());
  for (std::size_t k = 0;; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      auto row = z.row(i);
      gates[i].masks.push_back(positive_mask(row));
      for (double& v : row) v = std::max(v, 0.0);
    }
    if (k == net.shape().L) break;
    z = kernels::gemm_nt(z, net.Psi(k + 1));
  }
  return gates;
}

Forward forward(const GReluNetwork& net, const GatePattern& gates,
                std::span<const double> x) {
  const NetworkShape& s = net.shape();
  if (x.size() != s.d_x) {
    throw DimensionError("input has length " + std::to_string(x.size()) +
                        ", expected " + std::to_string(s.d_x));
  }
  check_gates(gates, s);
#ifndef NDEBUG
  if (all_finite(x) && compute_gates(net, x) != gates) {
    throw ContractError("forward: gates were not derived from this input");
  }
#endif
  Forward f;
  f.hidden.reserve(s.L + 1);
  Vector h = kernels::gemv(net.C(), x);
  apply_mask(h, gates.D(0));
  f.hidden.push_back(h);
  for (std::size_t k = 1; k <= s.L; ++k) {
    h = kernels::gemv(net.W(k), h);
    apply_mask(h, gates.D(k));
    f.hidden.push_back(h);
  }
  f.output = kernels::gemv(net.B(), h);
  return f;
}

SubnetworkCache::SubnetworkCache(const GReluNetwork& net, const GatePattern& gates) {
  const NetworkShape& s = net.shape();
  check_gates(gates, s);
  gt_.reserve(s.L + 1);
  Matrix gt = net.C().transpose();
  for (std::size_t r = 0; r < gt.rows(); ++r) apply_mask(gt.row(r), gates.D(0));
  gt_.push_back(std::move(gt));
  for (std::size_t k = 1; k <= s.L; ++k) {
    std::vector<const BitMask*> masks(s.d_x, &gates.D(k));
    // G_k^T = G_{k-1}^T W_k^T D_k
    gt_.push_back(kernels::masked_gemm_nt(gt_.back(), net.W(k), masks));
  }

  f_.resize(s.L + 1);
  Matrix f = net.B();
  for (std::size_t p = 0; p < f.rows(); ++p) apply_mask(f.row(p), gates.D(s.L));
  f_[s.L] = std::move(f);
  for (std::size_t k = s.L; k >= 1; --k) {
    const Matrix& next = f_[k];
    Matrix cur(s.d_y, s.m);
    for (std::size_t p = 0; p < s.d_y; ++p) {
      copy_into(kernels::gemv_t(net.W(k), next.row(p)), cur.row(p));
      apply_mask(cur.row(p), gates.D(k - 1));
    }
    f_[k - 1] = std::move(cur);
  }
}

const Matrix& SubnetworkCache::F(std::size_t k) const {
  if (k < 1 || k > f_.size()) {
    throw ContractError("F index " + std::to_string(k) + " outside [1, " +
                        std::to_string(f_.size()) + "]");
  }
  return f_[k - 1];
}

const Matrix& SubnetworkCache::GT(std::size_t k) const {
  if (k >= gt_.size()) {
    throw ContractError("G index " + std::to_string(k) + " outside [0, " +
                        std::to_string(gt_.size() - 1) + "]");
  }
  return gt_[k];
}

Matrix SubnetworkCache::G(std::size_t k) const { return GT(k).transpose(); }

Matrix subnetwork_F(const GReluNetwork& net, const GatePattern& gates, std::size_t k) {
  if (k < 1 || k > net.shape().L + 1) {
    throw ContractError("F index " + std::to_string(k) + " out of range");
  }
  return SubnetworkCache(net, gates).F(k);
}

Matrix subnetwork_G(const GReluNetwork& net, const GatePattern& gates, std::size_t k) {
  if (k > net.shape().L) {
    throw ContractError("G index " + std::to_string(k) + " out of range");
  }
  return SubnetworkCache(net, gates).G(k);
}

Matrix effective_matrix(const GReluNetwork& net, const GatePattern& gates) {
  check_gates(gates, net.shape());
  Matrix gt = net.C().transpose();
  for (std::size_t r = 0; r < gt.rows(); ++r) apply_mask(gt.row(r), gates.D(0));
  for (std::size_t k = 1; k <= net.shape().L; ++k) {
    std::vector<const BitMask*> masks(gt.rows(), &gates.D(k));
    gt = kernels::masked_gemm_nt(gt, net.W(k), masks);
  }
  // B G_L = B (G_L^T)^T
  return kernels::gemm_nt(net.B(), gt);
}

namespace {

void check_z_range(std::size_t ka, std::size_t kb, std::size_t L) {
  if (kb < 1 || kb > ka || ka > L) {
    throw ContractError("Z index requires 1 <= kb <= ka <= L, got ka=" +
                        std::to_string(ka) + " kb=" + std::to_string(kb));
  }
}

}  // namespace

Matrix intermediate_Z(const GReluNetwork& net, const GatePattern& gates,
                      std::size_t ka, std::size_t kb) {
  check_gates(gates, net.shape());
  check_z_range(ka, kb, net.shape().L);
  const std::size_t m = net.shape().m;
  Matrix z(m, m);
  for (std::size_t s = 0; s < m; ++s) z(s, s) = gates.D(kb).test(s) ? 1.0 : 0.0;
  for (std::size_t j = kb + 1; j <= ka; ++j) {
    z = kernels::gemm_nn(net.W(j), z);
    for (std::size_t r = 0; r < m; ++r) {
      if (!gates.D(j).test(r)) std::fill(z.row(r).begin(), z.row(r).end(), 0.0);
    }
  }
  return z;
}

LinearOperator z_operator(const GReluNetwork& net, const GatePattern& gates,
                          std::size_t ka, std::size_t kb) {
  check_gates(gates, net.shape());
  check_z_range(ka, kb, net.shape().L);
  const std::size_t m = net.shape().m;
  LinearOperator op;
  op.rows = m;
  op.cols = m;
  op.apply = [&net, &gates, ka, kb](std::span<const double> x, std::span<double> y) {
    Vector v(x.begin(), x.end());
    apply_mask(v, gates.D(kb));
    for (std::size_t j = kb + 1; j <= ka; ++j) {
      v = kernels::gemv(net.W(j), v);
      apply_mask(v, gates.D(j));
    }
    copy_into(v, y);
  };
  op.apply_t = [&net, &gates, ka, kb](std::span<const double> x, std::span<double> y) {
    Vector v(x.begin(), x.end());
    apply_mask(v, gates.D(ka));
    for (std::size_t j = ka; j > kb; --j) {
      v = kernels::gemv_t(net.W(j), v);
      apply_mask(v, gates.D(j - 1));
    }
    copy_into(v, y);
  };
  return op;
}

ReluForward relu_forward(const ReluNetwork& relu, std::span<const double> x) {
  const NetworkShape& s = relu.shape();
  check_input(x, s.d_x);
  ReluForward f;
  f.pre.reserve(s.L + 1);
  f.post.reserve(s.L + 1);
  f.masks.reserve(s.L + 1);
  Vector z = kernels::gemv(relu.C(), x);
  for (std::size_t k = 0;; ++k) {
    f.masks.push_back(positive_mask(z));
    Vector a = z;
    for (double& v : a) v = std::max(v, 0.0);
    f.pre.push_back(std::move(z));
    f.post.push_back(std::move(a));
    if (k == s.L) break;
    z = kernels::gemv(relu.Wt(k + 1), f.post.back());
  }
  const Vector& top = relu.readout() == ReadoutMode::Rectified ? f.post.back() : f.pre.back();
  f.output = kernels::gemv(relu.B(), top);
  return f;
}

GReluNetwork relu_to_grelu(const ReluNetwork& relu) {
  auto frozen = std::make_shared<FrozenLayers>();
  frozen->C = relu.C();
  frozen->B = relu.B();
  frozen->Psi = relu.weights();
  return GReluNetwork(relu.shape(), std::move(frozen), relu.weights());
}

std::vector<Vector> relu_footprint(const ReluForward& f, ReadoutMode mode) {
  if (mode == ReadoutMode::Rectified) return f.post;
  std::vector<Vector> out = f.pre;
  if (!out.empty()) out[0] = f.post[0];
  return out;
}

}  // namespace grelu
