// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The hallmark authors
 *
 * @file   random.hpp
 * @brief  Platform-independent draws on top of std::mt19937_64.
 *
 * The standard distributions are implementation-defined, so every draw that
 * feeds a persisted or compared artifact goes through these helpers.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>

namespace hallmark {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double unit_uniform(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n).
inline std::size_t uniform_index(std::mt19937_64 &rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  constexpr std::uint64_t top = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = top - top % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

/// Fisher-Yates.
template <typename V> void shuffle_in_place(V &v, std::mt19937_64 &rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

/// Standard normal truncated to [-2, 2] (Box-Muller with rejection).
inline double truncated_normal(std::mt19937_64 &rng) {
  constexpr double two_pi = 6.283185307179586;
  for (;;) {
    const double u1 = 1.0 - unit_uniform(rng); // (0, 1]
    const double u2 = unit_uniform(rng);
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    if (std::abs(z) <= 2.0) return z;
  }
}

} // namespace hallmark
