#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace grelu {

// Fixed-length bit vector, 64 bits per word, unused tail bits kept zero.
class BitMask {
 public:
  BitMask() = default;
  explicit BitMask(std::size_t size, bool value = false)
      : size_(size), words_((size + 63) / 64, value ? ~0ull : 0ull) {
    clear_tail();
  }

  std::size_t size() const noexcept { return size_; }

  bool test(std::size_t i) const noexcept {
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }
  void set(std::size_t i, bool value = true) noexcept {
    const std::uint64_t bit = 1ull << (i & 63);
    if (value) {
      words_[i >> 6] |= bit;
    } else {
      words_[i >> 6] &= ~bit;
    }
  }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  // |this AND other|
  std::size_t count_and(const BitMask& other) const noexcept {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      c += static_cast<std::size_t>(std::popcount(words_[w] & other.words_[w]));
    }
    return c;
  }

  // |this XOR other|
  std::size_t count_xor(const BitMask& other) const noexcept {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_.size(); ++w) {
      c += static_cast<std::size_t>(std::popcount(words_[w] ^ other.words_[w]));
    }
    return c;
  }

  BitMask complement() const {
    BitMask out = *this;
    for (auto& w : out.words_) w = ~w;
    out.clear_tail();
    return out;
  }

  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  bool operator==(const BitMask&) const = default;

 private:
  void clear_tail() noexcept {
    if (size_ % 64 != 0 && !words_.empty()) {
      words_.back() &= (1ull << (size_ % 64)) - 1;
    }
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace grelu
