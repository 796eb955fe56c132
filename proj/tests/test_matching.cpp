#include <doctest.h>

#include "fk/errors.hpp"
#include "fk/matching.hpp"
#include "fk/rng.hpp"
#include "fk/systems.hpp"
#include "oracles.hpp"

using namespace fk;

namespace {

BitMatrix checkerboard() {
  const auto s = make_system("shift:arity=2,window=1");
  const OrbitSample ox = sample_orbit(*s, s->parse_point("0101"), 4, 1);
  const OrbitSample oy = sample_orbit(*s, s->parse_point("1010"), 4, 1);
  return compat_matrix(*s, ox, oy, 0.5);
}

BitMatrix all(std::size_t n, bool v) {
  BitMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.set(i, j, v);
  return m;
}

}  // namespace

TEST_CASE("compat matrix of alternating words is a checkerboard") {
  const BitMatrix m = checkerboard();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(m.get(i, j) == ((i + j) % 2 == 1));
}

TEST_CASE("compat matrix corner cases") {
  const auto s = make_system("rotation:alpha=0.6180339887");
  const OrbitSample o = sample_orbit(*s, CirclePoint{0.3}, 16, 1);
  const BitMatrix self = compat_matrix(*s, o, o, 1e-9);
  for (std::size_t i = 0; i < 16; ++i) CHECK(self.get(i, i));
  const BitMatrix full = compat_matrix(*s, o, sample_orbit(*s, CirclePoint{0.7}, 16, 1), 0.6);
  CHECK(full.count() == 256);
}

TEST_CASE("max matching on small instances") {
  CHECK(max_matching(all(4, true)).size() == 4);
  CHECK(max_matching(all(4, false)).size() == 0);
  const Matching m = max_matching(checkerboard());
  CHECK(m.size() == 3);
  CHECK(m.valid_on(checkerboard()));
  CHECK(max_matching_bruteforce(checkerboard()).size() == 3);
  BitMatrix one(5, 5);
  one.set(2, 3);
  CHECK(max_matching_size(one) == 1);
  BitMatrix diag(7, 7);
  for (std::size_t i = 0; i < 7; ++i) diag.set(i, i);
  CHECK(max_matching_size(diag) == 7);
}

TEST_CASE("max matching agrees with subset enumeration") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const BitMatrix m = oracle::random_matrix(rng, n, n, rng.uniform(0.05, 0.6));
    const std::size_t expect = oracle::matching_size(m);
    CHECK(max_matching_size(m) == expect);
    const Matching mm = max_matching(m);
    CHECK(mm.size() == expect);
    CHECK(mm.valid_on(m));
  }
}

TEST_CASE("prefix matching sizes equal block maxima") {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 20 + rng.below(120);
    const BitMatrix m = oracle::random_matrix(rng, n, n, 0.1);
    std::vector<std::size_t> prefixes = {1, n / 3, n / 2, n};
    const auto sizes = prefix_matching_sizes(m, prefixes);
    for (std::size_t k = 0; k < prefixes.size(); ++k) {
      BitMatrix block(prefixes[k], prefixes[k]);
      for (std::size_t i = 0; i < prefixes[k]; ++i)
        for (std::size_t j = 0; j < prefixes[k]; ++j) block.set(i, j, m.get(i, j));
      CHECK(sizes[k] == max_matching_size(block));
    }
  }
}

TEST_CASE("fbar gap examples") {
  const auto s = make_system("shift:arity=2,window=1");
  const PhasePoint x = s->parse_point("0101"), y = s->parse_point("1010");
  CHECK(fbar_gap(*s, x, y, 4, 0.5) == doctest::Approx(0.25));
  CHECK(fbar_gap(*s, x, y, 4, 0.45) == doctest::Approx(0.25));
  CHECK(fbar_gap(*s, x, x, 10, 0.01) == 0.0);
}

TEST_CASE("golden rotation orbits shadow each other") {
  const auto s = make_system("rotation:alpha=0.6180339887");
  const GapEstimate g = fbar_limsup(*s, CirclePoint{0.0}, CirclePoint{0.37}, 0.05, {2000, 5000, 10000, 20000});
  CHECK(g.tail_sup < 0.05);
  const RhoResult r = rho_fk(*s, CirclePoint{0.1}, CirclePoint{0.8}, {2500, 5000, 10000, 20000}, 0.01);
  CHECK(r.value <= 0.05);
  CHECK(r.bracketed);
}

TEST_CASE("random shift points stay apart") {
  const auto s = make_system("shift:arity=2,window=32");
  const GapEstimate g = fbar_limsup(*s, s->parse_point("seed:1"), s->parse_point("seed:2"), 0.4, {1000, 2000, 3000, 5000});
  CHECK(g.tail_sup > 0.1);
}

TEST_CASE("rho_fk of identical points is within tolerance") {
  const auto s = make_system("torus:alpha1=0.6180339887,alpha2=0.41421356");
  SplitMix64 rng(8);
  const PhasePoint x = s->random_point(rng);
  CHECK(rho_fk(*s, x, x, {100, 200, 400, 800}, 0.01).value <= 0.01);
}

TEST_CASE("degenerate identity map recovers the point distance") {
  // Under rotation by 1/2 both orbits are 2-periodic and stay at distance r,
  // so the gap is 0 for delta > r and 1 below.
  const auto s = make_system("rotation:alpha=0.5");
  const RhoResult r = rho_fk(*s, CirclePoint{0.1}, CirclePoint{0.35}, {10, 20, 30, 40}, 1e-4);
  CHECK(r.value == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("discrete facts hold exactly") {
  // Monotonicity in delta and f_{n+s} <= f_n + s/n, compared in integers.
  SplitMix64 rng(2024);
  const char* specs[] = {"rotation:alpha=0.6180339887", "shift:arity=2,window=8", "torus:alpha1=0.3,alpha2=0.7071"};
  for (int trial = 0; trial < 60; ++trial) {
    const auto s = make_system(specs[trial % 3]);
    const PhasePoint x = s->random_point(rng), y = s->random_point(rng);
    const std::size_t n = 10 + rng.below(80), extra = 1 + rng.below(40);
    const OrbitSample ox = sample_orbit(*s, x, static_cast<double>(n + extra), 1);
    const OrbitSample oy = sample_orbit(*s, y, static_cast<double>(n + extra), 1);
    const double d1 = rng.uniform(0.01, 0.3), d2 = d1 + rng.uniform(0.0, 0.3);
    const BitMatrix m1 = compat_matrix(*s, ox, oy, d1), m2 = compat_matrix(*s, ox, oy, d2);
    const std::size_t pre[] = {n, n + extra};
    const auto a = prefix_matching_sizes(m1, pre), b = prefix_matching_sizes(m2, pre);
    CHECK(b[0] >= a[0]);
    CHECK(b[1] >= a[1]);
    const long nn = static_cast<long>(n), ss = static_cast<long>(extra);
    const long lhs = (nn + ss - static_cast<long>(a[1])) * nn;
    const long rhs = (nn - static_cast<long>(a[0])) * (nn + ss) + ss * (nn + ss);
    CHECK(lhs <= rhs);
  }
}

TEST_CASE("gap estimates take the last-quartile maximum") {
  const GapEstimate g = make_gap_estimate({1, 2, 3, 4, 5, 6, 7, 8}, {0.9, 0.8, 0.7, 0.6, 0.1, 0.2, 0.4, 0.3});
  CHECK(tail_start(8) == 6);
  CHECK(g.tail_sup == doctest::Approx(0.4));
}

TEST_CASE("oversized brute force is refused") {
  CHECK_THROWS_AS(max_matching_bruteforce(all(15, true)), RefusalError);
}
