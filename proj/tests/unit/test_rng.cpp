#include <algorithm>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "vw/rng.hpp"

TEST_CASE("splitmix64 matches the published reference stream") {
  std::uint64_t state = 0;
  CHECK(vw::splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(vw::splitmix64(state) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("same seed gives the same stream, different seeds differ") {
  vw::Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("uniform stays in [0, 1) and has the right mean") {
  vw::Rng rng(7);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("index is within range and hits every value") {
  vw::Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.index(7);
    REQUIRE(k < 7);
    ++hits[k];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("normal has unit variance") {
  vw::Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(s / n == doctest::Approx(0.0).epsilon(0.01));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("shuffle is a permutation and is seed-deterministic") {
  std::vector<int> a(50), b(50);
  std::iota(a.begin(), a.end(), 0);
  b = a;
  vw::Rng r1(5), r2(5);
  r1.shuffle(std::span<int>(a));
  r2.shuffle(std::span<int>(b));
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("derive_seed separates salts") {
  CHECK(vw::derive_seed(1, 1) != vw::derive_seed(1, 2));
  CHECK(vw::derive_seed(1, 1) != vw::derive_seed(2, 1));
  CHECK(vw::derive_seed(9, 4) == vw::derive_seed(9, 4));
}
