#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace dart {

/// Seeded random source. Draws are derived from the raw mt19937_64 stream
/// (whose output is fixed by the standard) rather than std distributions,
/// whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  int below(int n);

  /// Index drawn from a probability vector by inverse CDF.
  int categorical(std::span<const double> probs);

  /// Combines seeds into a well-mixed child seed (splitmix64 finalizer).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::mt19937_64 engine_;
};

}  // namespace dart
