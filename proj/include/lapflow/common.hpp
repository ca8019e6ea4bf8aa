#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace lapflow {

// Default tolerances. See README for how they interact; scenario files may
// override the ones that are exposed per diagnostic.
inline constexpr double kTauProj = 1e-10;  // stopping tolerance of iterative projections
inline constexpr double kTauFeas = 1e-8;   // membership slack for "point lies in the set"
inline constexpr double kTauIneq = 1e-8;   // slack for the projection inequalities
inline constexpr double kTauRes = 1e-6;    // residual nonnegativity slack
inline constexpr double kBoundThreshold = 1e6;       // "bounded" = sup-norm below this
inline constexpr double kDivergenceThreshold = 1e12; // integrator hard stop

/// Malformed scenario/signal input (CLI exit code 2).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A certificate precondition failed (CLI exit code 3).
class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SplitMix64: tiny, portable, seedable generator. Every random draw in the
/// toolkit flows through this, so identical seeds reproduce identical bytes.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

/// Independent generator for (seed, stream). Scenario components draw from
/// separate streams (0 = graph, 1 = initial states, 2 = protocol, 3 = sweep)
/// so adding draws to one component never perturbs the others.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 mixer(seed);
  const std::uint64_t base = mixer.next();
  return SplitMix64(base + stream * 0xda942042e4dd58b5ULL);
}

/// 17-significant-digit text for a double; round-trips exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace lapflow
