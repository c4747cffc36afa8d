#include <cmath>

#include "csm/rng.hpp"
#include "doctest.h"

using namespace csm;

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(1, 0), b(1, 0), c(1, 1), d(2, 0);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
}

TEST_CASE("rng variates have the right moments") {
  Rng rng(3);
  double su = 0, sn = 0, sn2 = 0;
  std::size_t hits[7] = {};
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0 && u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z, sn2 += z * z;
    ++hits[rng.uniform_index(7)];
  }
  CHECK(std::abs(su / n - 0.5) < 0.005);
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(std::abs(sn2 / n - 1.0) < 0.02);
  for (auto h : hits) CHECK(std::abs(static_cast<double>(h) / n - 1.0 / 7.0) < 0.005);
}
