#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace azarnet {

// SplitMix64 finalizer. Used to expand seeds and to derive per-item seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// xoshiro256** 1.0 (Blackman & Vigna), state seeded from the 64-bit seed by
// four successive SplitMix64 outputs. Every derived draw below is defined in
// terms of next_u64() with integer arithmetic or IEEE-exact scaling, so a
// given seed yields the same stream on every platform. Normal draws go
// through libm (log/cos) and are only reproducible per platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  // Top 53 bits scaled into [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection on the top bits. n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  double normal() noexcept;

  // Fisher-Yates from the last element down, using below().
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

}  // namespace azarnet
