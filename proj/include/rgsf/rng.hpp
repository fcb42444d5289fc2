#pragma once

// Counter-based 64-bit generator.
//
// Output k of a stream is splitmix64_mix(key + (k + 1) * 0x9E3779B97F4A7C15),
// with key = splitmix64_mix(seed ^ splitmix64_mix(stream)). Draws depend only
// on (seed, stream, k), so any published seed reproduces a run bit-exactly on
// any platform with IEEE doubles. Streams used by the library:
//   0 sample positions, 1 measurement noise, 2 device synthesis,
//   3 padded-domain positions, 100+ test/oracle use.

#include <cmath>
#include <cstdint>

#include "rgsf/types.hpp"

namespace rgsf {

namespace stream_id {
inline constexpr std::uint64_t kPositions = 0;
inline constexpr std::uint64_t kNoise = 1;
inline constexpr std::uint64_t kDevice = 2;
inline constexpr std::uint64_t kPaddedPositions = 3;
}  // namespace stream_id

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class CounterRng {
public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(splitmix64_mix(seed ^ splitmix64_mix(stream + kGamma))) {}

  std::uint64_t next_u64() {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * kGamma);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Index uniform on [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  /// Standard normal by Box-Muller; the second variate is discarded so each
  /// draw consumes exactly two counter values.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rgsf
