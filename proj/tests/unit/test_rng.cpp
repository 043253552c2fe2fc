#include <cmath>
#include <set>
#include <vector>

#include <omp.h>

#include "doctest.h"
#include "grelu/rng.hpp"

using namespace grelu;

TEST_CASE("philox4x32-10 known-answer vectors") {
  using C = std::array<std::uint32_t, 4>;
  using K = std::array<std::uint32_t, 2>;
  CHECK(philox4x32_10(C{0, 0, 0, 0}, K{0, 0}) ==
        C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are pure functions of seed, stream and index") {
  const RngStream a(42, 7);
  const RngStream b(42, 7);
  for (std::uint64_t i = 0; i < 100; ++i) {
    CHECK(a.uniform(i) == b.uniform(i));
    CHECK(a.normal(i) == b.normal(i));
  }
  const RngStream other_stream(42, 8);
  const RngStream other_seed(43, 7);
  int same_stream = 0;
  int same_seed = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    same_stream += a.uniform(i) == other_stream.uniform(i);
    same_seed += a.uniform(i) == other_seed.uniform(i);
  }
  CHECK(same_stream == 0);
  CHECK(same_seed == 0);
}

TEST_CASE("uniform draws stay in the open unit interval") {
  const RngStream s(1, 1);
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const double u = s.uniform(i);
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("parallel fill reproduces sequential draws regardless of thread count") {
  const RngStream s(9, 3);
  std::vector<double> seq(1001);
  for (std::size_t j = 0; j < seq.size(); ++j) seq[j] = 2.0 * s.normal(5 + j);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    std::vector<double> par(seq.size());
    s.fill_normal(par, 2.0, 5);
    CHECK(par == seq);
  }
  omp_set_num_threads(saved);
}

TEST_CASE("normal draws have unit variance and zero mean") {
  const std::size_t n = 1'000'000;
  std::vector<double> v(n);
  RngStream(2024, 11).fill_normal(v, 1.0);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n - 1);
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("cursor below stays in range and covers it") {
  RngCursor c(5, 5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = c.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}
