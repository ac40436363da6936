#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace mia {

/// Seeded generator used everywhere randomness is needed.
///
/// The engine is std::mt19937_64 (fully specified by the C++ standard, so the
/// raw 64-bit stream is identical across implementations). The standard
/// distributions are not portable, so the derived draws are defined here:
///
///   uniform_index(n): modulo with rejection of the top partial block
///   uniform01():      top 53 bits scaled by 2^-53, in [0, 1)
///   normal():         Marsaglia polar method, second variate discarded
///
/// Integer draws (and therefore dataset splits) are bit-reproducible on any
/// platform. Real-valued draws additionally depend on libm's log/sqrt.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - (max % n + 1) % n;
    std::uint64_t x = engine_();
    while (x > limit) x = engine_();
    return x % n;
  }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mia
