// Times the OpenMP kernels against the serial reference versions and checks
// that both agree. Usage: kernel_bench [m] [n] [reps]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include <omp.h>

#include "grelu/bitmask.hpp"
#include "grelu/kernels.hpp"
#include "grelu/linalg.hpp"
#include "grelu/rng.hpp"

namespace {

using namespace grelu;
using Clock = std::chrono::steady_clock;

double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    best = std::min(best, ms);
  }
  return best;
}

double max_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  }
  return d;
}

double max_diff(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

void row(const char* name, double serial, double par, double diff) {
  std::printf("%-16s %10.3f %10.3f %8.2fx %10.2e\n", name, serial, par, serial / par, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t m = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 768;
  const std::size_t n = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 64;
  const int reps = argc > 3 ? std::atoi(argv[3]) : 3;

  const Matrix w = gaussian_matrix(m, m, 2.0 / static_cast<double>(m), RngStream(7, 1));
  const Matrix h = gaussian_matrix(n, m, 1.0, RngStream(7, 2));
  const Vector x(h.row(0).begin(), h.row(0).end());
  std::vector<BitMask> masks;
  RngCursor cur(RngStream(7, 3));
  for (std::size_t i = 0; i < n; ++i) {
    BitMask b(m);
    for (std::size_t u = 0; u < m; ++u) b.set(u, cur.uniform() < 0.5);
    masks.push_back(std::move(b));
  }
  std::vector<const BitMask*> mp;
  for (const auto& b : masks) mp.push_back(&b);

  std::printf("m=%zu n=%zu threads=%d reps=%d\n", m, n, omp_get_max_threads(), reps);
  std::printf("%-16s %10s %10s %9s %10s\n", "kernel", "serial_ms", "omp_ms", "speedup",
              "max_diff");

  Matrix s, p;
  double ts = best_ms(reps, [&] { s = kernels::serial::gemm_nt(h, w); });
  double tp = best_ms(reps, [&] { p = kernels::gemm_nt(h, w); });
  row("gemm_nt", ts, tp, max_diff(s, p));

  ts = best_ms(reps, [&] { s = kernels::serial::masked_gemm_nt(h, w, mp); });
  tp = best_ms(reps, [&] { p = kernels::masked_gemm_nt(h, w, mp); });
  row("masked_gemm_nt", ts, tp, max_diff(s, p));

  ts = best_ms(reps, [&] { s = kernels::serial::gemm_nn(h, w); });
  tp = best_ms(reps, [&] { p = kernels::gemm_nn(h, w); });
  row("gemm_nn", ts, tp, max_diff(s, p));

  ts = best_ms(reps, [&] { s = kernels::serial::gemm_tn(h, h); });
  tp = best_ms(reps, [&] { p = kernels::gemm_tn(h, h); });
  row("gemm_tn", ts, tp, max_diff(s, p));

  ts = best_ms(reps, [&] { s = kernels::serial::transpose(w); });
  tp = best_ms(reps, [&] { p = kernels::transpose(w); });
  row("transpose", ts, tp, max_diff(s, p));

  Vector vs, vp;
  ts = best_ms(reps * 10, [&] { vs = kernels::serial::gemv(w, x); });
  tp = best_ms(reps * 10, [&] { vp = kernels::gemv(w, x); });
  row("gemv", ts, tp, max_diff(vs, vp));

  ts = best_ms(reps * 10, [&] { vs = kernels::serial::gemv_t(w, x); });
  tp = best_ms(reps * 10, [&] { vp = kernels::gemv_t(w, x); });
  row("gemv_t", ts, tp, max_diff(vs, vp));
  return 0;
}
