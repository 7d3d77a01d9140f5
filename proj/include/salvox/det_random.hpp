// det_random.hpp - portable deterministic sampling on top of std::mt19937_64.
//
// The standard engines are bit-exact everywhere but the distributions are
// not, so anything that must reproduce across compilers (codebooks, the
// synthetic corpus) draws through these helpers instead of <random>
// distributions.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "salvox/geometry.hpp"

namespace salvox {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Uniform integer in [0, n). Modulo bias is negligible for n << 2^64 and
// the rule is identical on every platform.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) { return rng() % n; }

// Uniform random rotation via Shoemake's random quaternion.
inline Mat3 random_rotation(Rng& rng) {
  double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double two_pi = 6.283185307179586476925286766559;
  double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  double qx = a * std::sin(two_pi * u2);
  double qy = a * std::cos(two_pi * u2);
  double qz = b * std::sin(two_pi * u3);
  double qw = b * std::cos(two_pi * u3);
  Mat3 r;
  r.m = {{{1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qz * qw), 2 * (qx * qz + qy * qw)},
          {2 * (qx * qy + qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qx * qw)},
          {2 * (qx * qz - qy * qw), 2 * (qy * qz + qx * qw), 1 - 2 * (qx * qx + qy * qy)}}};
  return r;
}

}  // namespace salvox
