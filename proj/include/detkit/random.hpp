#pragma once

#include <cstdint>
#include <random>

namespace detkit {

/// Seeded generator with a portable output sequence.
///
/// The engine is std::mt19937_64, whose output is fixed by the C++ standard.
/// The std distributions are not (their algorithms are implementation
/// defined), so every conversion to doubles and bounded integers is done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n); n must be > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace detkit
