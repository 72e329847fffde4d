#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fbh {

/// Deterministic random stream. The engine (mt19937_64) has a fully
/// specified sequence, and the uniform/normal transforms below are spelled
/// out explicitly, so a given seed yields identical draws on every run.
/// (std::uniform_real_distribution et al. are implementation-defined and
/// would break bit-reproducibility guarantees across toolchains.)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (one draw per call, pair cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64 in all
    // uses, and determinism matters more than an unmeasurable bias.
    return engine_() % n;
  }

  /// Derive an independent stream (seed mixed with a stream index).
  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer decorrelates consecutive (seed, index) pairs
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace fbh
