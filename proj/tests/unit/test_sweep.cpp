#include <sstream>

#include "doctest.h"
#include "grelu/config.hpp"
#include "grelu/error.hpp"
#include "grelu/svg.hpp"
#include "grelu/sweep.hpp"

using namespace grelu;

TEST_CASE("flat config parsing") {
  const FlatConfig f = FlatConfig::parse_string(
      "# comment\n"
      "data.n = 12\n"
      "\n"
      "train.lr=2.5e-3   # trailing comment\n"
      "grid.widths = 32, nL  n2L\n");
  CHECK(f.get_uint("data.n", 0) == 12);
  CHECK(f.get_double("train.lr", 0.0) == 2.5e-3);
  CHECK(f.get_list("grid.widths") == std::vector<std::string>{"32", "nL", "n2L"});
  CHECK(f.get_list("grid.seeds").empty());
  CHECK(f.get_uint("data.d", 7) == 7);
  CHECK(f.unknown_keys({"data.n", "train.lr"}) == std::vector<std::string>{"grid.widths"});

  std::ostringstream out;
  f.write(out);
  CHECK(out.str() == "data.n = 12\ngrid.widths = 32, nL  n2L\ntrain.lr = 2.5e-3\n");
  CHECK(FlatConfig::parse_string(out.str()) == f);
}

TEST_CASE("flat config errors") {
  CHECK_THROWS_AS(FlatConfig::parse_string("data.n 12\n"), FormatError);
  CHECK_THROWS_AS(FlatConfig::parse_string("n = 12\n"), FormatError);
  CHECK_THROWS_AS(FlatConfig::parse_string("data n = 12\n"), FormatError);
  CHECK_THROWS_AS(FlatConfig::parse_string("data.n = 1\ndata.n = 2\n"), FormatError);
  const FlatConfig f = FlatConfig::parse_string("a.b = 1\ndata.n = twelve\n");
  try {
    f.get_uint("data.n", 0);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 8);
  }
  CHECK_THROWS_AS(f.get_double("data.n", 0.0), FormatError);
  CHECK_THROWS_AS(FlatConfig::load("/nonexistent/sweep.cfg"), IoError);
}

TEST_CASE("sweep config round trip") {
  const FlatConfig f = FlatConfig::parse_string(
      "data.n = 8\ndata.d = 4\ndata.seed = 3\ntrain.depth = 2\ntrain.lr = theoretical\n"
      "train.iters = 50\ntrain.target_loss = 1e-4\ntrain.log_every = 5\n"
      "grid.widths = 16 nL\ngrid.seeds = 1, 2\ngrid.arches = grelu relu\n"
      "output.csv = out.csv\noutput.log_y = 0\n");
  const SweepConfig c = SweepConfig::from_flat(f);
  CHECK(c.n == 8);
  CHECK(c.lr == "theoretical");
  CHECK(c.widths == std::vector<std::string>{"16", "nL"});
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.arches == std::vector<Arch>{Arch::GReLU, Arch::ReLU});
  CHECK_FALSE(c.log_y);
  CHECK(c.resolve_width("nL") == 16);
  CHECK(c.resolve_width("n2L") == 128);
  CHECK(SweepConfig::from_flat(c.to_flat()) == c);
  CHECK(SweepConfig::from_flat(FlatConfig{}) == SweepConfig{});
}

TEST_CASE("sweep config rejects bad values") {
  auto parse = [](const std::string& s) { return SweepConfig::from_flat(FlatConfig::parse_string(s)); };
  CHECK_THROWS_AS(parse("train.speed = 1\n"), FormatError);
  CHECK_THROWS_AS(parse("grid.widths = 0\n"), FormatError);
  CHECK_THROWS_AS(parse("grid.widths = wide\n"), FormatError);
  CHECK_THROWS_AS(parse("grid.arches = tanh\n"), FormatError);
  CHECK_THROWS_AS(parse("grid.seeds = -1\n"), FormatError);
  CHECK_THROWS_AS(parse("train.lr = -1\n"), FormatError);
  CHECK_THROWS_AS(parse("train.deterministic = 2\n"), FormatError);
  CHECK_THROWS_AS(parse_arch("sigmoid"), ContractError);
}

TEST_CASE("empty grid produces no runs and a header-only csv") {
  SweepConfig c;
  c.widths = {"16"};
  const auto runs = run_sweep(c, 2);
  CHECK(runs.empty());
  std::ostringstream out;
  write_sweep_csv(out, runs);
  CHECK(out.str() == "arch,width,seed,status,iter,loss,grad_norm,grad_tdiff,tau,eta,wall_ms,hamming\n");
}

TEST_CASE("sweep results are independent of the worker count") {
  SweepConfig c;
  c.n = 6;
  c.d = 4;
  c.depth = 2;
  c.iters = 15;
  c.log_every = 5;
  c.target_loss = 0.0;
  c.widths = {"20", "nL"};
  c.seeds = {2, 1};
  c.arches = {Arch::ReLU, Arch::GReLU};
  const auto one = run_sweep(c, 1);
  const auto three = run_sweep(c, 3);
  REQUIRE(one.size() == 8);
  std::ostringstream a;
  std::ostringstream b;
  write_sweep_csv(a, one);
  write_sweep_csv(b, three);
  CHECK(a.str() == b.str());
  CHECK(one[0].arch == Arch::GReLU);
  CHECK(one[0].width == 12);
  CHECK(one[0].seed == 1);
  CHECK(one[1].seed == 2);
  CHECK(one.back().arch == Arch::ReLU);
  for (const SweepRun& r : one) {
    CHECK(r.status == RunStatus::Exhausted);
    CHECK(r.log.rows.size() == 4);
  }
}

TEST_CASE("a diverging grid point is recorded, not thrown") {
  SweepConfig c;
  c.n = 6;
  c.d = 4;
  c.depth = 3;
  c.lr = "50";
  c.iters = 50;
  c.widths = {"64"};
  c.seeds = {1};
  c.arches = {Arch::GReLU};
  const auto runs = run_sweep(c, 1);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].status == RunStatus::Diverged);
  CHECK(std::string(status_name(runs[0].status)) == "diverged");
}

TEST_CASE("svg chart") {
  std::ostringstream out;
  ChartOptions opts;
  opts.title = "a < b";
  opts.log_y = true;
  write_svg_chart(out, {{"first", {0, 1, 2}, {1.0, 0.1, 0.0}}, {"second", {0, 2}, {2.0, 0.5}}}, opts);
  const std::string s = out.str();
  CHECK(s.rfind("<svg", 0) == 0);
  CHECK(s.find("</svg>") != std::string::npos);
  CHECK(s.find("a &lt; b") != std::string::npos);
  CHECK(s.find("first") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t p = s.find("<polyline"); p != std::string::npos; p = s.find("<polyline", p + 1)) ++lines;
  CHECK(lines == 2);

  std::ostringstream empty;
  write_svg_chart(empty, {}, ChartOptions{});
  CHECK(empty.str().find("</svg>") != std::string::npos);
}
