#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace kgqa {

// mt19937_64 is fully specified by the standard; the distributions are not.
// These helpers keep every seeded stage bit-reproducible across toolchains.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be > 0.
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  // Rejection on the top of the range removes modulo bias.
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

template <typename Container>
void shuffle(Container& items, Rng& rng) {
  shuffle(std::span(items.data(), items.size()), rng);
}

}  // namespace kgqa
