#include <cmath>
#include <sstream>

#include "doctest.h"
#include "grelu/propagation.hpp"
#include "grelu/train.hpp"
#include "support.hpp"

using namespace grelu;
using testing::to_eigen;

namespace {

struct Setup {
  GReluNetwork net;
  Dataset ds;
  GateSet gates;
};

Setup make(const NetworkShape& s, std::size_t n, std::uint64_t seed) {
  Setup out{init_network(s, seed), testing::random_dataset(n, s.d_x, s.d_y, seed + 100), {}};
  out.gates = compute_gates(out.net, out.ds.X);
  return out;
}

double loss_oracle(const GReluNetwork& net, const GateSet& gates, const Dataset& ds) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    Eigen::VectorXd h = testing::mask_matrix(gates[i].D(0)) * to_eigen(net.C()) *
                        to_eigen(Matrix(ds.d_x(), 1, Vector(ds.X.row(i).begin(), ds.X.row(i).end())));
    for (std::size_t k = 1; k <= net.shape().L; ++k) {
      h = testing::mask_matrix(gates[i].D(k)) * to_eigen(net.W(k)) * h;
    }
    const Eigen::VectorXd out = to_eigen(net.B()) * h;
    for (std::size_t p = 0; p < ds.d_y(); ++p) {
      const double r = out(p) - ds.Y(i, p);
      s += 0.5 * r * r;
    }
  }
  return s;
}

GReluNetwork with_layer(const GReluNetwork& net, std::size_t k, std::size_t r,
                        std::size_t c, double delta) {
  std::vector<Matrix> w = net.weights();
  w[k - 1](r, c) += delta;
  return GReluNetwork(net.shape(), net.frozen(), std::move(w));
}

}  // namespace

TEST_CASE("loss matches a per-example dense evaluation") {
  const Setup s = make({4, 2, 9, 3}, 5, 1);
  CHECK(loss(s.net, s.gates, s.ds) == doctest::Approx(loss_oracle(s.net, s.gates, s.ds)).epsilon(1e-12));
}

TEST_CASE("loss of a network with zero readout is half the label energy") {
  Setup s = make({3, 2, 6, 2}, 4, 2);
  auto frozen = std::make_shared<FrozenLayers>(*s.net.frozen());
  frozen->B = Matrix(2, 6);
  const GReluNetwork zero(s.net.shape(), frozen, s.net.weights());
  double e = 0.0;
  for (double v : s.ds.Y.flat()) e += 0.5 * v * v;
  CHECK(loss(zero, s.gates, s.ds) == doctest::Approx(e).epsilon(1e-15));
  for (const Matrix& g : all_layer_gradients(zero, s.gates, s.ds)) CHECK(frobenius_norm(g) == 0.0);
}

TEST_CASE("gradients agree with central differences") {
  const Setup s = make({3, 2, 6, 3}, 3, 3);
  const auto grads = all_layer_gradients(s.net, s.gates, s.ds);
  // The loss is quadratic in each single entry, so central differences are
  // exact up to rounding and a large step keeps rounding small.
  const double h = 1e-2;
  for (std::size_t k = 1; k <= 3; ++k) {
    CHECK(layer_gradient(s.net, s.gates, s.ds, k) == grads[k - 1]);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 6; ++c) {
        const double up = loss(with_layer(s.net, k, r, c, h), s.gates, s.ds);
        const double dn = loss(with_layer(s.net, k, r, c, -h), s.gates, s.ds);
        const double fd = (up - dn) / (2 * h);
        CHECK(grads[k - 1](r, c) == doctest::Approx(fd).epsilon(1e-9).scale(1e-6));
      }
    }
  }
  CHECK_THROWS_AS(layer_gradient(s.net, s.gates, s.ds, 0), ContractError);
}

TEST_CASE("gradient equals the sum of rank-one example terms") {
  const Setup s = make({4, 3, 7, 2}, 4, 4);
  const auto grads = all_layer_gradients(s.net, s.gates, s.ds);
  for (std::size_t k = 1; k <= 2; ++k) {
    testing::Dense want = testing::Dense::Zero(7, 7);
    for (std::size_t i = 0; i < 4; ++i) {
      const Vector x(s.ds.X.row(i).begin(), s.ds.X.row(i).end());
      const Forward f = forward(s.net, s.gates[i], x);
      Eigen::VectorXd r(3);
      for (std::size_t p = 0; p < 3; ++p) r(p) = f.output[p] - s.ds.Y(i, p);
      const Eigen::VectorXd g = to_eigen(subnetwork_F(s.net, s.gates[i], k + 1)).transpose() * r;
      const Eigen::VectorXd prev = Eigen::Map<const Eigen::VectorXd>(f.hidden[k - 1].data(), 7);
      want += g * prev.transpose();
    }
    CHECK(testing::rel_frob(grads[k - 1], testing::from_eigen(want)) < 1e-12);
  }
}

TEST_CASE("relu gradients match central differences away from kinks") {
  const ReluNetwork relu = init_relu_network({3, 1, 8, 2}, 5);
  const Dataset ds = testing::random_dataset(3, 3, 1, 6);
  const auto g = all_layer_gradients(relu, ds);
  const double h = 1e-7;
  for (std::size_t k = 1; k <= 2; ++k) {
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        auto shifted = [&](double d) {
          std::vector<Matrix> w = relu.weights();
          w[k - 1](r, c) += d;
          return ReluNetwork(relu.shape(), relu.frozen(), std::move(w), relu.readout());
        };
        const double fd = (loss(shifted(h), ds) - loss(shifted(-h), ds)) / (2 * h);
        CHECK(g[k - 1](r, c) == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
      }
    }
  }
}

TEST_CASE("theoretical learning rate") {
  CHECK(theoretical_lr({8, 1, 768, 3}, 16) == doctest::Approx(4.5211580e-6).epsilon(1e-7));
  CHECK(theoretical_lr({1, 1, 4, 50}, 4) == doctest::Approx(3.125e-8).epsilon(1e-12));
  CHECK(theoretical_lr({16, 1, 2048, 4}, 4) == doctest::Approx(16.0 / (256.0 * 64.0)));
  CHECK_THROWS_AS(theoretical_lr({8, 1, 8, 3}, 0), ContractError);
}

TEST_CASE("zero learning rate keeps every logged loss equal") {
  const Setup s = make({4, 1, 10, 2}, 4, 7);
  TrainConfig cfg;
  cfg.eta = 0.0;
  cfg.max_iters = 5;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  REQUIRE(res.log.rows.size() == 6);
  for (const TrainRow& r : res.log.rows) {
    CHECK(r.loss == res.log.rows[0].loss);
    CHECK(r.grad_tdiff == 0.0);
    CHECK(r.tau == 0.0);
  }
  CHECK(res.net == s.net);
  CHECK(res.reason == StopReason::ItersExhausted);
}

TEST_CASE("one small step decreases the loss") {
  int decreased = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const Setup s = make({5, 1, 16, 3}, 6, 1000 + t);
    TrainConfig cfg;
    cfg.max_iters = 1;
    cfg.eta = 1e-5;
    const auto res = train(s.net, s.gates, s.ds, cfg);
    decreased += res.log.rows[1].loss < res.log.rows[0].loss;
  }
  CHECK(decreased == 50);
}

TEST_CASE("a training step is W - eta * grad") {
  const Setup s = make({4, 2, 6, 2}, 3, 8);
  TrainConfig cfg;
  cfg.max_iters = 1;
  cfg.eta = 0.01;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  const auto g = all_layer_gradients(s.net, s.gates, s.ds);
  for (std::size_t k = 1; k <= 2; ++k) {
    Matrix want = s.net.W(k);
    want.axpy(-0.01, g[k - 1]);
    CHECK(res.net.W(k) == want);
  }
  CHECK(res.net.frozen() == s.net.frozen());
}

TEST_CASE("training is deterministic and logs bit-identical rows") {
  const Setup s = make({6, 1, 12, 3}, 5, 9);
  TrainConfig cfg;
  cfg.eta = 1e-3;
  cfg.max_iters = 20;
  cfg.log_every = 3;
  cfg.track_hamming = true;
  const auto a = train(s.net, s.gates, s.ds, cfg);
  const auto b = train(s.net, s.gates, s.ds, cfg);
  std::ostringstream oa;
  std::ostringstream ob;
  a.log.write_csv(oa);
  b.log.write_csv(ob);
  CHECK(oa.str() == ob.str());
  CHECK(a.net == b.net);

  std::vector<std::size_t> iters;
  double tau = 0.0;
  for (const TrainRow& r : a.log.rows) {
    iters.push_back(r.iter);
    CHECK(r.tau >= tau);
    tau = r.tau;
    CHECK(r.hamming.value() == 0.0);
  }
  CHECK(iters == std::vector<std::size_t>{0, 3, 6, 9, 12, 15, 18, 20});
  CHECK(tau > 0.0);
}

TEST_CASE("zero iterations log only the initial row") {
  const Setup s = make({4, 1, 8, 2}, 3, 10);
  TrainConfig cfg;
  cfg.max_iters = 0;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  REQUIRE(res.log.rows.size() == 1);
  CHECK(res.log.rows[0].iter == 0);
  CHECK(res.log.rows[0].loss == doctest::Approx(loss(s.net, s.gates, s.ds)));
  CHECK(res.iters == 0);
}

TEST_CASE("reaching the target stops early") {
  const Setup s = make({4, 1, 8, 2}, 3, 11);
  TrainConfig cfg;
  cfg.max_iters = 100;
  cfg.target_loss = 1e300;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  CHECK(res.reason == StopReason::TargetReached);
  CHECK(res.log.rows.size() == 1);
}

TEST_CASE("a huge learning rate raises a divergence error with the log") {
  const Setup s = make({8, 1, 64, 3}, 8, 12);
  TrainConfig cfg;
  cfg.eta = 10.0;
  cfg.max_iters = 100;
  cfg.log_every = 50;
  try {
    train(s.net, s.gates, s.ds, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iter() >= 1);
    CHECK(e.log().rows.back().iter == e.iter());
    CHECK(e.log().rows.size() == 2);
  }
}

TEST_CASE("config validation") {
  const Setup s = make({4, 1, 8, 2}, 3, 13);
  TrainConfig cfg;
  cfg.eta = -1.0;
  CHECK_THROWS_AS(train(s.net, s.gates, s.ds, cfg), ContractError);
  cfg.eta = 1e-3;
  cfg.log_every = 0;
  CHECK_THROWS_AS(train(s.net, s.gates, s.ds, cfg), ContractError);
  cfg.log_every = 1;
  GateSet fewer(s.gates.begin(), s.gates.end() - 1);
  CHECK_THROWS_AS(train(s.net, fewer, s.ds, cfg), ContractError);
  const Dataset wrong = testing::random_dataset(3, 5, 1, 1);
  CHECK_THROWS_AS(train(s.net, compute_gates(s.net, s.ds.X), wrong, cfg), DimensionError);
}

TEST_CASE("train log csv round trip") {
  const Setup s = make({4, 1, 8, 2}, 3, 14);
  TrainConfig cfg;
  cfg.max_iters = 7;
  cfg.log_every = 2;
  cfg.track_hamming = true;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  std::ostringstream out;
  res.log.write_csv(out);
  std::istringstream in(out.str());
  const TrainLog back = TrainLog::read_csv(in);
  CHECK(back.comments == res.log.comments);
  CHECK(back.rows == res.log.rows);
  CHECK(back.has_hamming);

  std::istringstream bad("iter,loss\n1,2\n");
  CHECK_THROWS_AS(TrainLog::read_csv(bad), FormatError);
  std::istringstream cells("iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms\n1,2,3\n");
  CHECK_THROWS_AS(TrainLog::read_csv(cells), FormatError);
}

TEST_CASE("theoretical mode records the formula value") {
  const Setup s = make({8, 1, 16, 3}, 16, 15);
  TrainConfig cfg;
  cfg.eta_theoretical = true;
  cfg.max_iters = 2;
  const auto res = train(s.net, s.gates, s.ds, cfg);
  CHECK(res.log.rows[1].eta == theoretical_lr({8, 1, 16, 3}, 16));
  CHECK(res.log.comments[0].find("eta_mode=theoretical") != std::string::npos);
}

TEST_CASE("relu training tracks mask flips") {
  const ReluNetwork relu = init_relu_network({6, 1, 32, 3}, 16);
  const Dataset ds = testing::random_dataset(8, 6, 1, 17);
  TrainConfig cfg;
  cfg.eta = 5e-3;
  cfg.max_iters = 30;
  const auto res = train(relu, ds, cfg);
  CHECK(res.log.has_hamming);
  CHECK(res.log.rows[0].hamming.value() == 0.0);
  double total = 0.0;
  for (const TrainRow& r : res.log.rows) {
    CHECK(r.hamming.value() >= 0.0);
    CHECK(r.hamming.value() <= 1.0);
    total += r.hamming.value();
  }
  const double d = hamming_activation_drift(relu, res.net, ds);
  CHECK(d >= 0.0);
  CHECK(hamming_activation_drift(relu, relu, ds) == 0.0);
  CHECK(res.log.rows.back().loss < res.log.rows.front().loss);
  (void)total;
}

TEST_CASE("mask drift counts flipped bits") {
  GatePattern a;
  a.masks = {BitMask(8), BitMask(8)};
  GatePattern b = a;
  b.masks[0].set(1);
  b.masks[1].set(2);
  b.masks[1].set(3);
  CHECK(mask_drift({a}, {b}, 2) == doctest::Approx(3.0 / 16));
  CHECK(mask_drift({a}, {b}, 1) == doctest::Approx(1.0 / 8));
  CHECK_THROWS_AS(mask_drift({a}, {b}, 3), DimensionError);
  CHECK_THROWS_AS(mask_drift({a}, {b, b}, 1), DimensionError);
}
