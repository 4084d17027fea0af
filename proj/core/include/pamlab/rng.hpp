#pragma once

// Counter-based splittable RNG.  Every draw is a pure function of
// (stream key, counter index), so samples can be generated in any order by
// any number of workers and come out bitwise identical.  The generator is
// splitmix64: the counter walks a Weyl sequence and the output is its
// avalanche mix.

#include <cmath>
#include <cstdint>

namespace pamlab::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// A stateless stream: word(n) is the n-th 64-bit output, O(1) random access.
struct Stream {
  std::uint64_t key = 0;

  constexpr std::uint64_t word(std::uint64_t n) const {
    return mix64(key + (n + 1) * kGolden);
  }

  // Uniform on (0, 1]; never 0, so log(uniform) stays finite.
  double uniform(std::uint64_t n) const {
    return static_cast<double>((word(n) >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal by Box-Muller.  Draws 2k and 2k+1 share the counter pair
  // (2k, 2k+1), so indexed access never desynchronizes a stream.
  double normal(std::uint64_t n) const {
    const std::uint64_t pair = n >> 1;
    const double u1 = uniform(2 * pair);
    const double u2 = uniform(2 * pair + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    return (n & 1) ? r * std::sin(a) : r * std::cos(a);
  }

  std::uint64_t index(std::uint64_t n, std::uint64_t m) const {
    return word(n) % m;
  }
};

// Child stream derivation; two mix rounds decorrelate the (master, idx) grid.
constexpr Stream substream(std::uint64_t master, std::uint64_t idx) {
  return Stream{mix64(mix64(master ^ 0x6A09E667F3BCC909ull) + idx * kGolden)};
}

constexpr Stream substream(std::uint64_t master, std::uint64_t a,
                           std::uint64_t b) {
  return substream(substream(master, a).key, b);
}

}  // namespace pamlab::rng
