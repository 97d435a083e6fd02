// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_RNG_HPP
#define ROMBAYES_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "rombayes/common.hpp"

namespace rombayes {

// Generator identifier recorded in run metadata. Uniforms come from the top 53
// bits of mt19937_64; normals from an explicit Box-Muller transform (the
// std::normal_distribution algorithm is not pinned by the standard, so results
// would differ across standard libraries).
inline constexpr const char* kRngName = "mt19937_64+boxmuller";

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent deterministic stream: (seed, stream_id) -> reproducible draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : eng_(splitmix64(seed ^ splitmix64(stream_id))) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1): rejects exact zero so log() stays finite.
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the sine partner is cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace rombayes

#endif  // ROMBAYES_RNG_HPP
