#include "grelu/rng.hpp"

#include <cmath>
#include <numbers>

namespace grelu {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;
constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                    std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMulA, ctr[0], lo0, hi0);
    mulhilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::array<std::uint64_t, 2> RngStream::block_bits(
    std::uint64_t block) const noexcept {
  const auto r = philox4x32_10(
      {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
       static_cast<std::uint32_t>(stream_),
       static_cast<std::uint32_t>(stream_ >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  return {(static_cast<std::uint64_t>(r[1]) << 32) | r[0],
          (static_cast<std::uint64_t>(r[3]) << 32) | r[2]};
}

double RngStream::uniform(std::uint64_t index) const noexcept {
  return to_open_unit(block_bits(index / 2)[index % 2]);
}

std::pair<double, double> RngStream::normal_pair(
    std::uint64_t block) const noexcept {
  const auto bits = block_bits(block);
  const double radius = std::sqrt(-2.0 * std::log(to_open_unit(bits[0])));
  const double angle = 2.0 * std::numbers::pi * to_open_unit(bits[1]);
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

double RngStream::normal(std::uint64_t index) const noexcept {
  const auto [a, b] = normal_pair(index / 2);
  return index % 2 == 0 ? a : b;
}

void RngStream::fill_normal(std::span<double> out, double stddev,
                            std::uint64_t offset) const {
  const std::int64_t n = static_cast<std::int64_t>(out.size());
  // Even offsets let every iteration own a whole block.
  if (offset % 2 != 0) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
      out[j] = stddev * normal(offset + static_cast<std::uint64_t>(j));
    }
    return;
  }
  const std::int64_t blocks = (n + 1) / 2;
  const std::uint64_t first = offset / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const auto [z0, z1] = normal_pair(first + static_cast<std::uint64_t>(b));
    out[2 * b] = stddev * z0;
    if (2 * b + 1 < n) out[2 * b + 1] = stddev * z1;
  }
}

std::uint64_t RngCursor::below(std::uint64_t n) noexcept {
  const auto bits = stream_.block_bits(next_ / 2)[next_ % 2];
  ++next_;
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(bits) * n) >> 64);
}

}  // namespace grelu
