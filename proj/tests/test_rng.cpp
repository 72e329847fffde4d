#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "fbh/rng.hpp"

using fbh::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed yields the identical sequence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 32; ++i)
    if (a.uniform() == b.uniform()) ++same;
  CHECK(same < 4);
}

TEST_CASE("uniform stays in [0, 1) and respects bounds") {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-3.0, 2.5);
    CHECK(u >= -3.0);
    CHECK(u < 2.5);
  }
}

TEST_CASE("normal moments are sane over 10k draws") {
  Rng r(11);
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("below returns values in range and is deterministic") {
  Rng a(3), b(3);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t va = a.below(12);
    CHECK(va < 12);
    CHECK(va == b.below(12));
  }
}

TEST_CASE("substreams are deterministic and decorrelated") {
  Rng a = Rng::substream(9, 4);
  Rng b = Rng::substream(9, 4);
  for (int i = 0; i < 50; ++i) CHECK(a.uniform() == b.uniform());

  // Neighboring indices and neighboring seeds must not produce the
  // same stream.
  Rng c = Rng::substream(9, 5);
  Rng d = Rng::substream(10, 4);
  Rng e = Rng::substream(9, 4);
  int same_c = 0, same_d = 0;
  for (int i = 0; i < 32; ++i) {
    const double u = e.uniform();
    if (u == c.uniform()) ++same_c;
    if (u == d.uniform()) ++same_d;
  }
  CHECK(same_c < 4);
  CHECK(same_d < 4);
}

}  // TEST_SUITE
