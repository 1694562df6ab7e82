#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace odmd {

// Counter-based random streams.
//
// A stream is identified by (seed, index). Its key is
//   key = mix64(mix64(seed) + 0xD1B54A32D192ED03 * index)
// and its k-th 64-bit output (k = 0, 1, ...) is
//   mix64(key + 0x9E3779B97F4A7C15 * (k + 1))
// where mix64 is the SplitMix64 finalizer. Every draw is a pure function of
// (seed, index, k), so streams can be regenerated in any order, on any
// thread, and in any language that has 64-bit wrapping arithmetic.
//
// Derived draws:
//   uniform()   = (u64 >> 11) * 2^-53                       in [0, 1)
//   normal()    = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)       two uniforms
//   rademacher  = top bit of u64 ? -1 : +1
//   index(n)    = (u64 * n) >> 64
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed of sub-stream `index` of `seed`, for drawing whole batches.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                           std::uint64_t index) {
  return mix64(mix64(seed) ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
}

class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kStreamGamma = 0xD1B54A32D192ED03ULL;

  constexpr Rng(std::uint64_t seed, std::uint64_t index)
      : key_(mix64(mix64(seed) + kStreamGamma * index)) {}

  constexpr std::uint64_t next_u64() { return mix64(key_ + kGamma * ++counter_); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double sigma) { return sigma * normal(); }

  double rademacher() { return (next_u64() >> 63) ? -1.0 : 1.0; }

  std::uint64_t index(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace odmd
