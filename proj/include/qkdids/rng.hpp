#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qkdids {

// SplitMix64 finalizer. Bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Derives a key from a parent key and a tag; used to split seeds into
// independent sub-streams (block index, pulse index, purpose salt).
constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent ^ mix64(tag + kGolden));
}

/// Counter-based random stream. The draws are a pure function of
/// (key, counter), so any sub-stream can be reconstructed without replaying
/// the draws that precede it.
class CounterRng {
 public:
  constexpr explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  constexpr std::uint64_t next_u64() noexcept {
    return mix64(key_ + kGolden * (++counter_));
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1); safe for log().
  constexpr double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  constexpr bool bit() noexcept { return (next_u64() >> 63) != 0; }

  /// Standard normal via Box-Muller (one output per call; the partner is
  /// discarded so the draw count per call stays fixed).
  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t below(std::uint64_t n) noexcept {
    // Multiply-shift; bias is < 2^-40 for the small n used here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace qkdids
