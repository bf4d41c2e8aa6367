#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace surfer {

// Seeded pseudo-random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distribution mappings below are
// written out because std::*_distribution results differ between standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (no cached second value).
  double normal();

  // Derive an independent seed from a base seed and a path of integers.
  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

 private:
  std::mt19937_64 engine_;
};

}  // namespace surfer
