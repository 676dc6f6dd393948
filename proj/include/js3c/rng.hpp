#pragma once

#include <cstdint>
#include <random>

namespace js3c {

// All stochastic behaviour goes through explicitly seeded engines; there is
// no global RNG state anywhere in the library.
using Rng = std::mt19937_64;

// Stable sub-stream derivation so independent consumers (per-scene, per-vote,
// per-parameter) never share a stream. splitmix64 finalizer.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  std::normal_distribution<double> d(mean, stddev);
  return d(rng);
}

}  // namespace js3c
