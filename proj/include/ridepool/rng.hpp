#pragma once

// Portable random helpers. The standard distributions are implementation
// defined, so everything that feeds a reproducible output goes through here.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace ridepool {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a base seed and a tag (step, worker, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  return splitmix64(splitmix64(base) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Knuth multiplication sampler; large rates are split into a sum of
// independent Poisson draws so exp(-lambda) never underflows.
inline int poisson(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  int total = 0;
  while (lambda > 0.0) {
    const double piece = std::min(lambda, 20.0);
    lambda -= piece;
    const double threshold = std::exp(-piece);
    double product = uniform01(rng);
    while (product > threshold) {
      ++total;
      product *= uniform01(rng);
    }
  }
  return total;
}

}  // namespace ridepool
