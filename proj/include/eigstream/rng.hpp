#pragma once

// Deterministic, seed-keyed random number generation.
//
// All randomness in the library flows through Rng, a SplitMix64 counter
// generator.  Independent random objects (stream shuffle, sketch columns,
// sampling coins, initial vectors, block plans) are derived from the master
// seed with derive_key(seed, tag, keys...), so every draw is reproducible
// and independent of evaluation order.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>

#include "eigstream/types.hpp"

namespace eigstream {

// FNV-1a 64-bit hash; used for domain-separation tags and config hashing.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace tags {
inline constexpr std::uint64_t kShuffle = fnv1a64("SHUF");
inline constexpr std::uint64_t kSketch = fnv1a64("SKCH");
inline constexpr std::uint64_t kSample = fnv1a64("SAMP");
inline constexpr std::uint64_t kInitVector = fnv1a64("Z0");
inline constexpr std::uint64_t kBlockPlan = fnv1a64("PLAN");
inline constexpr std::uint64_t kOjaInit = fnv1a64("OJA0");
inline constexpr std::uint64_t kGenerator = fnv1a64("GEN");
}  // namespace tags

// Absorbs a sequence of 64-bit values into a key, order-sensitively.
constexpr std::uint64_t derive_key(std::uint64_t seed) { return seed; }

template <typename... Rest>
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t head,
                                   Rest... rest) {
  return derive_key(splitmix_mix((seed + 0x9E3779B97F4A7C15ull) ^ head),
                    static_cast<std::uint64_t>(rest)...);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return splitmix_mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform01_positive() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.  Always consumes exactly two draws and
  // keeps no cached second value, so draw counts are position-independent.
  double normal() {
    double u1 = uniform01_positive();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Unbiased uniform integer in [0, bound) by rejection.
  std::uint64_t uniform_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound == 0");
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    std::uint64_t x = next_u64();
    while (x < threshold) x = next_u64();
    return x % bound;
  }

  // Binomial(n, p) by inverse-CDF walk along the pmf recurrence.  For large
  // means the walk is replaced by a rounded-and-clamped normal approximation
  // (error is negligible there and the walk would be linear in the mean).
  std::int64_t binomial(std::int64_t n, double p) {
    if (n < 0) throw std::invalid_argument("binomial: n < 0");
    if (n == 0 || p <= 0.0) {
      (void)uniform01();  // keep draw count independent of parameters
      return 0;
    }
    if (p >= 1.0) {
      (void)uniform01();
      return n;
    }
    const double mean = static_cast<double>(n) * p;
    if (mean >= 1e4) {
      const double sd = std::sqrt(mean * (1.0 - p));
      double y = std::round(mean + sd * normal());
      if (y < 0.0) y = 0.0;
      if (y > static_cast<double>(n)) y = static_cast<double>(n);
      return static_cast<std::int64_t>(y);
    }
    const double u = uniform01();
    const double ratio = p / (1.0 - p);
    double pmf = std::exp(static_cast<double>(n) * std::log1p(-p));
    double cdf = pmf;
    std::int64_t k = 0;
    while (cdf <= u && k < n) {
      pmf *= ratio * static_cast<double>(n - k) / static_cast<double>(k + 1);
      cdf += pmf;
      ++k;
      // Guard against pmf underflow stalling the walk in the far tail.
      if (pmf <= 0.0 && cdf <= u) break;
    }
    return k;
  }

  // Vector of m iid standard normals.
  Vector gaussian_vector(Index m) {
    Vector v(m);
    for (Index i = 0; i < m; ++i) v[i] = normal();
    return v;
  }

  Matrix gaussian_matrix(Index rows, Index cols) {
    Matrix g(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) g(i, j) = normal();
    return g;
  }

 private:
  std::uint64_t state_;
};

// Convenience: an Rng whose stream is keyed by (seed, tag, keys...).
template <typename... Keys>
Rng keyed_rng(std::uint64_t seed, std::uint64_t tag, Keys... keys) {
  return Rng(derive_key(seed, tag, static_cast<std::uint64_t>(keys)...));
}

}  // namespace eigstream
