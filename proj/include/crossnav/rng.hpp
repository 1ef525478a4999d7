/*
 * Copyright (c) 2026 crossnav contributors
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "crossnav/core.hpp"

namespace crossnav {

namespace detail {

inline uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Deterministic random stream. Uniform/normal draws are generated from the
/// raw engine output directly so that sequences do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  Rng() : Rng(0) {}

  explicit Rng(uint64_t seed) : seed_(seed) {
    uint64_t s = seed;
    engine_.seed(detail::splitmix64(s));
  }

  /// Derives an independent child stream from a label and index. The same
  /// (seed, label, index) always yields the same stream, regardless of how
  /// many draws were taken from the parent.
  Rng child(const std::string& label, uint64_t index = 0) const {
    uint64_t s = seed_ ^ detail::fnv1a64(label);
    uint64_t a = detail::splitmix64(s);
    s ^= index * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL;
    uint64_t b = detail::splitmix64(s);
    return Rng(a ^ (b + (index << 1)));
  }

  uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace crossnav
