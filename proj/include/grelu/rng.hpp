#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

namespace grelu {

// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of
// (counter, key); the rest of the library derives every random draw from it.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

// Counter-based stream keyed by (seed, stream-id). Draw `i` of a stream is a
// pure function of (seed, stream, i), so fills can be split across threads in
// any order and still reproduce bit-for-bit.
//
// Layout: key = seed, counter = (block index, stream id). Each block yields two
// 64-bit words, i.e. two uniforms or one Box-Muller pair.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::array<std::uint64_t, 2> block_bits(std::uint64_t block) const noexcept;

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform(std::uint64_t index) const noexcept;

  // Standard normal pair from one block.
  std::pair<double, double> normal_pair(std::uint64_t block) const noexcept;
  double normal(std::uint64_t index) const noexcept;

  // out[j] = stddev * normal(offset + j). Parallel over blocks.
  void fill_normal(std::span<double> out, double stddev,
                   std::uint64_t offset = 0) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Sequential convenience cursor over a stream.
class RngCursor {
 public:
  explicit RngCursor(RngStream stream, std::uint64_t start = 0) noexcept
      : stream_(stream), next_(start) {}
  RngCursor(std::uint64_t seed, std::uint64_t stream) noexcept
      : stream_(seed, stream) {}

  double uniform() noexcept { return stream_.uniform(next_++); }
  double normal() noexcept { return stream_.normal(next_++); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

 private:
  RngStream stream_;
  std::uint64_t next_ = 0;
};

}  // namespace grelu
