#pragma once
// Seedable RNG with cheap substream derivation. Every Monte Carlo trial
// draws from its own stream keyed by (seed, stream index), so results do
// not depend on how trials are scheduled across threads.

#include <cmath>
#include <cstdint>

namespace sipmstat {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// SplitMix64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix64(mix64(seed + 0x9E3779B97F4A7C15ull) +
                     stream * 0xBF58476D1CE4E5B9ull)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

  /// Uniform integer in [0, n). Multiply-shift; bias is O(n / 2^64).
  std::uint32_t uniform_int(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Knuth product-of-uniforms sampler; halves lambda recursively so the
  /// expected loop length stays bounded.
  long poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 30.0) return poisson(lambda * 0.5) + poisson(lambda * 0.5);
    const double limit = std::exp(-lambda);
    long k = 0;
    double prod = next_double();
    while (prod > limit) {
      ++k;
      prod *= next_double();
    }
    return k;
  }

 private:
  std::uint64_t state_;
};

}  // namespace sipmstat
