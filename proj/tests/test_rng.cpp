#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "pamlab/rng.hpp"

using pamlab::rng::Stream;
using pamlab::rng::substream;

TEST_CASE("words are a pure function of key and index") {
  Stream a{42};
  Stream b{42};
  for (std::uint64_t i = 0; i < 64; ++i) CHECK(a.word(i) == b.word(i));
  CHECK(a.word(7) == a.word(7));
  Stream c{43};
  CHECK(a.word(0) != c.word(0));
}

TEST_CASE("substreams have distinct keys") {
  std::set<std::uint64_t> keys;
  keys.insert(9001);
  for (std::uint64_t i = 0; i < 512; ++i) {
    keys.insert(substream(9001, i).key);
  }
  CHECK(keys.size() == 513);
}

TEST_CASE("substream chains do not collide across levels") {
  // (master, i, j) chains for a small grid are pairwise distinct.
  std::set<std::uint64_t> keys;
  std::size_t count = 0;
  for (std::uint64_t i = 0; i < 32; ++i) {
    const std::uint64_t level = substream(77, i).key;
    for (std::uint64_t j = 0; j < 32; ++j) {
      keys.insert(substream(level, j).key);
      ++count;
    }
  }
  CHECK(keys.size() == count);
}

TEST_CASE("single-bit key changes flip about half the output bits") {
  double total = 0.0;
  int trials = 0;
  for (std::uint64_t k = 1; k <= 250; ++k) {
    for (int bit : {0, 17, 43, 63}) {
      const std::uint64_t a = Stream{k}.word(5);
      const std::uint64_t b = Stream{k ^ (1ull << bit)}.word(5);
      total += std::popcount(a ^ b);
      ++trials;
    }
  }
  const double mean = total / trials;
  CHECK(mean > 24.0);
  CHECK(mean < 40.0);
}

TEST_CASE("uniform lies in (0, 1] with the right first moments") {
  Stream s{123};
  const std::size_t n = 200000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = s.uniform(i);
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // se(mean) = 1/sqrt(12 n); five sigma.
  CHECK(std::fabs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n));
  CHECK(std::fabs(var - 1.0 / 12.0) < 5e-3);
}

TEST_CASE("normals have unit variance and vanishing skew") {
  Stream s{999};
  const std::size_t n = 200000;
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = s.normal(i);
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m3 /= n;
  CHECK(std::fabs(m1) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::fabs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
  CHECK(std::fabs(m3) < 5.0 * std::sqrt(15.0 / n));
}

TEST_CASE("normal pairs from one counter are uncorrelated") {
  Stream s{2024};
  const std::size_t n = 100000;
  double cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cross += s.normal(2 * i) * s.normal(2 * i + 1);
  }
  CHECK(std::fabs(cross / n) < 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("index is bounded and reproducible") {
  Stream s{7};
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const std::uint64_t v = s.index(i, 37);
    CHECK(v < 37);
    CHECK(v == s.index(i, 37));
  }
}
