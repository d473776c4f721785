#pragma once

/**
 * Deterministic splittable RNG.
 *
 * SplitMix64 core with explicit seeds everywhere: every stochastic operation
 * in the library takes a seed, and batch work derives independent substreams
 * by hashing (seed, stream index). Gaussian variates go through the inverse
 * CDF so draws depend only on this header and special_math.hpp, not on
 * platform-specific distribution code.
 */

#include <cstdint>

#include "candi/special_math.hpp"

namespace candi {

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  /// Independent substream for (this seed, stream index).
  static Rng split(uint64_t seed, uint64_t stream) {
    return Rng(mix(seed ^ (0x9E3779B97F4A7C15ull * (stream + 0x632BE59BD9B4E019ull))));
  }

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix(state_);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool next_bernoulli(double p) { return next_double() < p; }

  /// Standard normal via inverse-CDF transform.
  double next_normal() { return std_normal_quantile(next_double()); }

  /// Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) {
    // Multiply-shift bound; bias is ~n/2^64, negligible at toy scales.
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace candi
