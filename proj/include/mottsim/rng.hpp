// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace mott {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ generator with the scalar distributions used across the
/// toolkit, implemented by hand so that streams are reproducible independent
/// of the standard library.
///
/// Replica streams are derived from (seed, replica, salt).  This is the
/// declared splitting rule: results never depend on scheduling order, and a
/// replica can be regenerated in isolation.
class RngStream {
 public:
  RngStream() : RngStream(0, 0, 0) {}

  explicit RngStream(std::uint64_t seed, std::uint64_t replica = 0,
                     std::uint64_t salt = 0) {
    std::uint64_t s = seed;
    s ^= (replica + 1) * 0x9e3779b97f4a7c15ULL;
    s ^= (salt + 1) * 0xd1b54a32d192ed03ULL;
    for (auto& w : state_) w = splitmix64(s);
    // all-zero state is invalid for xoshiro
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// uniform double in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// uniform double in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// exponential waiting time with the given rate
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Exact Poisson sample.  Knuth inversion on chunks of the mean, so large
  /// means stay inside double range; cost is O(mean).
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
    std::uint64_t total = 0;
    while (mean > kChunk) {
      total += poisson_knuth(kChunk);
      mean -= kChunk;
    }
    return total + poisson_knuth(mean);
  }

  /// Binomial(n, p) by direct Bernoulli trials (used only for small n).
  std::uint32_t binomial(std::uint32_t n, double p) {
    std::uint32_t k = 0;
    for (std::uint32_t i = 0; i < n; ++i) k += bernoulli(p) ? 1u : 0u;
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  static constexpr double kChunk = 60.0;

  std::array<std::uint64_t, 4> state_{};
};

/// Poisson quantile: smallest k with P(Z <= k) >= u, Z ~ Poisson(mean).
/// CDF scan with the stable pmf recursion; valid for mean < ~700 (e^-mean
/// must not underflow), which covers every cell intensity used here.
inline std::uint64_t poisson_quantile(double mean, double u) {
  if (!(mean >= 0.0) || !(mean < 700.0))
    throw std::invalid_argument("poisson_quantile: mean out of range");
  if (mean == 0.0) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  // u < 1 always (53-bit uniforms), so the scan terminates well inside this cap
  const std::uint64_t cap =
      static_cast<std::uint64_t>(mean + 60.0 * std::sqrt(mean) + 60.0);
  while (cdf < u && k < cap) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

/// P(Z >= n) for Z ~ Poisson(mean), computed from the pmf sum.
inline double poisson_upper_tail(double mean, std::uint64_t n) {
  if (!(mean >= 0.0) || !(mean < 700.0))
    throw std::invalid_argument("poisson_upper_tail: mean out of range");
  if (n == 0) return 1.0;
  double p = std::exp(-mean);
  double cdf = p;
  for (std::uint64_t k = 1; k < n; ++k) {
    p *= mean / static_cast<double>(k);
    cdf += p;
  }
  return std::max(0.0, 1.0 - cdf);
}

}  // namespace mott
