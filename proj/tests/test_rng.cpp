#include <doctest.h>

#include "pudle/rng.hpp"

#include <cmath>
#include <cstdint>

using namespace pudle;

TEST_CASE("rng: deterministic in (seed, stream)") {
  Rng a(42, 1), b(42, 1), c(42, 2), d(43, 1);
  for (int i = 0; i < 100; ++i) {
    std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
  }
}

TEST_CASE("rng: uniform range and moments") {
  Rng rng(7);
  double sum = 0.0, sum2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum2 / n == doctest::Approx(1.0 / 3).epsilon(0.01));
}

TEST_CASE("rng: gaussian moments") {
  Rng rng(11);
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    sum += g;
    sum2 += g * g;
    sum4 += g * g * g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(sum4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("rng: uniform_int bounds and coverage") {
  Rng rng(3);
  int counts[7] = {0};
  for (int i = 0; i < 70000; ++i) {
    std::uint64_t v = rng.uniform_int(7);
    REQUIRE(v < 7);
    counts[v]++;
  }
  for (int k = 0; k < 7; ++k)
    CHECK(counts[k] == doctest::Approx(10000).epsilon(0.05));
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}
