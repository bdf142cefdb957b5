#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cwmi {

/// splitmix64 finalizer; used for seed derivation and hashing small ints.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent sub-seed from (master, stream-tag, index).
/// Same inputs always give the same sub-seed on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence
/// the standard pins down exactly) and derives all floating-point draws with
/// explicit arithmetic, never via std::uniform_real_distribution and friends,
/// so streams are bit-identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1): top 53 bits of the engine output.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (deterministic, caches the spare value).
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cwmi
