// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace nasforge {

// SplitMix64 (Steele/Lea/Flood 2014): 64-bit state, full-period, identical
// output on every platform. All randomized behaviour in this project
// (tensor fills, sampling, mutation) derives from this generator so that a
// seed pins the result bit for bit.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Rejection sampling, no modulo bias. n > 0.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

  // Uniform double in [-1, 1), 53 mantissa bits.
  double symmetric() {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed for substream `index` (per graph node,
// per trial, ...). One extra mix step decorrelates nearby indices.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 g(seed ^ (index * 0xd1342543de82ef95ull + 0x632be59bd9b4e019ull));
  return g.next();
}

}  // namespace nasforge
