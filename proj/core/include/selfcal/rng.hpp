#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include "selfcal/common.hpp"

namespace selfcal::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Splittable seed derivation: folds a path of stream ids into a base seed.
/// Used everywhere a component needs its own independent substream, e.g.
/// derive(base, {strategy_idx, snr_idx, trial_idx}).
inline std::uint64_t derive(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t id : path) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

/// Deterministic random stream. The uniform and Gaussian transforms are spelled
/// out (rather than std::*_distribution) so that a given seed produces the same
/// values on every standard library.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  /// Raw 64 engine bits, for integer draws.
  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [-pi, pi).
  double uniform_phase() { return (2.0 * uniform() - 1.0) * std::numbers::pi; }

  /// Circularly symmetric complex Gaussian CN(0, variance):
  /// real and imaginary parts independent N(0, variance/2).
  cdouble complex_gaussian(double variance) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-variance * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace selfcal::rng

namespace selfcal {
using rng::derive;
using rng::splitmix64;
using rng::Stream;
}  // namespace selfcal
