#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "posbias/rng.hpp"

using namespace posbias;

TEST_CASE("same seed replays the same sequence") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived seeds differ across paths") {
  std::set<uint64_t> seen;
  for (uint64_t p = 0; p < 50; ++p) {
    seen.insert(derive_seed(7, {kClickStream, p}));
    seen.insert(derive_seed(7, {kCorpusStream, p}));
  }
  CHECK(seen.size() == 100);
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
}

TEST_CASE("next_unit stays in [0,1) and looks uniform") {
  RandomStream rng(123);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("next_normal has roughly standard moments") {
  RandomStream rng(99);
  const int n = 200000;
  double mean = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.next_normal();
    mean += z;
    sq += z * z;
  }
  mean /= n;
  sq /= n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(sq - 1.0) < 0.02);
}

TEST_CASE("next_below respects the bound and covers small ranges") {
  RandomStream rng(5);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}
