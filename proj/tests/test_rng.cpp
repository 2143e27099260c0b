#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "spoofdet/rng.hpp"

using namespace spoofdet;

TEST_CASE("same seed reproduces the exact stream") {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(7), b(8);
  bool any_diff = false;
  for (int i = 0; i < 16 && !any_diff; ++i) any_diff = a.next_u64() != b.next_u64();
  CHECK(any_diff);
}

TEST_CASE("derived streams are independent of parent draw count") {
  Rng parent(42);
  Rng before = parent.derive("shuffle");
  for (int i = 0; i < 100; ++i) parent.next_u64();
  Rng after = parent.derive("shuffle");
  for (int i = 0; i < 50; ++i) CHECK(before.next_u64() == after.next_u64());
}

TEST_CASE("derived streams differ by purpose and by index") {
  Rng base(42);
  Rng init = base.derive("init");
  Rng shuffle = base.derive("shuffle");
  CHECK(init.next_u64() != shuffle.next_u64());

  Rng e0 = base.derive("example", 0);
  Rng e1 = base.derive("example", 1);
  CHECK(e0.next_u64() != e1.next_u64());

  // The indexed and plain forms must not collide either.
  Rng plain = base.derive("example");
  Rng idx0 = base.derive("example", 0);
  CHECK(plain.next_u64() != idx0.next_u64());
}

TEST_CASE("derivation is keyed off the base seed, not the state") {
  Rng a(99);
  a.next_u64();
  a.next_u64();
  Rng b(99);
  CHECK(a.derive("x").next_u64() == b.derive("x").next_u64());
  CHECK(a.base_seed() == 99);
}

TEST_CASE("next_unit stays in [0,1) and is unbiased") {
  Rng rng(1234);
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  double mean = sum / n;
  // Three standard errors of the uniform mean: 3/sqrt(12 n).
  double bound = 3.0 / std::sqrt(12.0 * n);
  CHECK(std::abs(mean - 0.5) < bound);
}

TEST_CASE("next_uniform respects its interval") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    double v = rng.next_uniform(-2.5, 1.5);
    CHECK(v >= -2.5);
    CHECK(v < 1.5);
  }
}

TEST_CASE("next_below covers [0, bound) and hits every residue") {
  Rng rng(77);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("next_int is inclusive on both ends") {
  Rng rng(3);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 2000; ++i) {
    long long v = rng.next_int(-3, 3);
    REQUIRE(v >= -3);
    REQUIRE(v <= 3);
    saw_lo |= v == -3;
    saw_hi |= v == 3;
  }
  CHECK(saw_lo);
  CHECK(saw_hi);
}

TEST_CASE("next_normal has standard moments") {
  Rng rng(2024);
  const int n = 100'000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.next_normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.02);

  Rng rng2(2024);
  double shifted = rng2.next_normal(10.0, 0.5);
  CHECK(std::isfinite(shifted));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> items(50);
  for (int i = 0; i < 50; ++i) items[i] = i;
  std::vector<int> a = items, b = items;
  Rng(11).derive("shuffle").shuffle(a);
  Rng(11).derive("shuffle").shuffle(b);
  CHECK(a == b);
  CHECK(a != items);  // 50! leaves identity with vanishing probability

  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == items);
}
