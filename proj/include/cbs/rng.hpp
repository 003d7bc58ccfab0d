#pragma once

// Counter-based stream derivation: every Monte Carlo sample owns a generator
// seeded from (master seed, sample index), so a sample's draws never depend on
// scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "cbs/core.hpp"

namespace cbs {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::uint64_t index)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL))) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open() { return 1.0 - uniform(); }

  /// Standard normal pair by Box-Muller; two uniforms per call.
  std::pair<double, double> normal_pair() {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double t = 2.0 * kPi * uniform();
    return {r * std::cos(t), r * std::sin(t)};
  }

  /// Isotropic unit vector; two uniforms per call.
  Vec3 direction() {
    const double z = 2.0 * uniform() - 1.0;
    const double p = 2.0 * kPi * uniform();
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(p), s * std::sin(p), z};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cbs
