#include <doctest.h>

#include <cmath>

#include "fk/errors.hpp"
#include "fk/rng.hpp"
#include "fk/system_spec.hpp"
#include "fk/systems.hpp"

using namespace fk;

namespace {

double circle(const PhasePoint& p) { return std::get<CirclePoint>(p).x; }
const FiberPoint& fiber(const PhasePoint& p) { return std::get<FiberPoint>(p); }

}  // namespace

TEST_CASE("splitmix64 reference values") {
  SplitMix64 rng(1234567);
  CHECK(rng.next() == 6457827717110365317ULL);
  CHECK(rng.next() == 3203168211198807973ULL);
  SplitMix64 u(0);
  const double v = u.uniform();
  CHECK(v >= 0.0);
  CHECK(v < 1.0);
}

TEST_CASE("system spec text round-trips") {
  for (const char* text : {"rotation:alpha=0.5", "torus:alpha1=0.1,alpha2=0.3", "shift:arity=2,window=32",
                           "sturmian:slope=0.618,window=16", "suspend(rotation:alpha=0.6180339887)",
                           "special(rotation:alpha=0.25;roof=cos:c=2,a=0.5)",
                           "timechange(suspend(rotation:alpha=0.6180339887);rate=cos:c=1,a=0.3)"}) {
    CAPTURE(text);
    const SystemSpec s = parse_system_spec(text);
    CHECK(parse_system_spec(s.to_string()).to_string() == s.to_string());
    CHECK(make_system(text)->describe() == s.to_string());
  }
}

TEST_CASE("system spec errors carry a column") {
  try {
    parse_system_spec("rotation:alpha=zz");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 1);
    CHECK(e.column() > 1);
  }
  CHECK_THROWS_AS(make_system("shift:arity=2,window=0"), ConfigError);
  CHECK_THROWS_AS(make_system("special(rotation:alpha=0.3;roof=cos:c=1,a=2)"), ConfigError);
  CHECK_THROWS_AS(parse_system_spec("suspend(rotation:alpha=0.3"), ConfigError);
  CHECK_THROWS_AS(make_system("timechange(rotation:alpha=0.3;rate=const:1)"), ConfigError);
  CHECK_THROWS_AS(make_system("rotation:alpha=0"), ConfigError);
}

TEST_CASE("rational rotation is a valid system") {
  const auto s = make_system("rotation:alpha=0.5");
  CHECK(circle(s->evolve(CirclePoint{0.25}, 1)) == doctest::Approx(0.75));
}

TEST_CASE("rotation evolves by the closed form") {
  const auto s = make_system("rotation:alpha=0.6180339887");
  const double expect = std::fmod(0.25 + 3 * 0.6180339887, 1.0);
  CHECK(circle(s->evolve(CirclePoint{0.25}, 3)) == doctest::Approx(expect).epsilon(1e-14));
  CHECK_THROWS_AS(s->evolve(CirclePoint{0.25}, 0.5), UsageError);
}

TEST_CASE("circle distance is arc length") {
  const auto s = make_system("rotation:alpha=0.3");
  CHECK(s->dist(CirclePoint{0.1}, CirclePoint{0.9}) == doctest::Approx(0.2));
  CHECK(s->dist(CirclePoint{0.9}, CirclePoint{0.1}) == doctest::Approx(0.2));
  CHECK(s->dist(CirclePoint{0.4}, CirclePoint{0.4}) == 0.0);
}

TEST_CASE("constant roof 1 special flow is the suspension") {
  const auto sp = make_system("special(rotation:alpha=0.6180339887;roof=const:1)");
  const auto su = make_system("suspend(rotation:alpha=0.6180339887)");
  SplitMix64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const PhasePoint p = su->random_point(rng);
    const double t = rng.uniform(-5.0, 5.0);
    CHECK(su->dist(sp->evolve(p, t), su->evolve(p, t)) < 1e-12);
  }
}

TEST_CASE("suspension crosses the unit roof") {
  const auto s = make_system("suspend(rotation:alpha=0.6180339887)");
  const PhasePoint q = s->evolve(FiberPoint{CirclePoint{0.1}, 0.0}, 1.0);
  CHECK(circle(to_phase(fiber(q).base)) == doctest::Approx(0.7180339887));
  CHECK(fiber(q).height == doctest::Approx(0.0));
}

TEST_CASE("flows satisfy the group law") {
  for (const char* text : {"suspend(rotation:alpha=0.6180339887)", "special(rotation:alpha=0.6180339887;roof=cos:c=2,a=0.5)",
                           "timechange(suspend(rotation:alpha=0.6180339887);rate=cos:c=1,a=0.3)",
                           "suspend(torus:alpha1=0.6180339887,alpha2=0.41421356)"}) {
    CAPTURE(text);
    const auto s = make_system(text);
    SplitMix64 rng(11);
    for (int k = 0; k < 10; ++k) {
      const PhasePoint p = s->random_point(rng);
      CHECK(s->dist(s->evolve(s->evolve(p, 1.3), -1.3), p) < 1e-9);
      const double a = rng.uniform(0.0, 3.0), b = rng.uniform(0.0, 3.0);
      CHECK(s->dist(s->evolve(s->evolve(p, a), b), s->evolve(p, a + b)) < 1e-7);
    }
  }
}

TEST_CASE("suspension distance interpolates base distances") {
  const auto s = make_system("suspend(rotation:alpha=0.6180339887)");
  CHECK(s->dist(FiberPoint{CirclePoint{0.1}, 0.0}, FiberPoint{CirclePoint{0.3}, 0.0}) == doctest::Approx(0.2));
  CHECK(s->dist(FiberPoint{CirclePoint{0.1}, 0.5}, FiberPoint{CirclePoint{0.3}, 0.5}) == doctest::Approx(0.2));

  const auto sh = make_system("suspend(shift:arity=2,window=8)");
  const auto& flow = dynamic_cast<const FiberFlow&>(*sh);
  const PhasePoint x = sh->parse_point("010011010@0");
  const PhasePoint y = sh->parse_point("011011011@0");
  const BasePoint bx = fiber(x).base, by = fiber(y).base;
  const double d0 = flow.base().base_dist(bx, by);
  const double d1 = flow.base().base_dist(flow.base().step(bx, 1), flow.base().step(by, 1));
  CHECK(d0 != doctest::Approx(d1));
  const double half = sh->dist(FiberPoint{bx, 0.5}, FiberPoint{by, 0.5});
  CHECK(half <= 0.5 * d0 + 0.5 * d1 + 1e-12);
  CHECK(sh->dist(x, y) == doctest::Approx(d0));
}

TEST_CASE("distances are symmetric and vanish on the diagonal") {
  for (const char* text : {"rotation:alpha=0.3", "torus:alpha1=0.1,alpha2=0.3", "shift:arity=3,window=12",
                           "sturmian:slope=0.618,window=16", "suspend(shift:arity=2,window=16)",
                           "special(rotation:alpha=0.6180339887;roof=cos:c=2,a=0.5)"}) {
    CAPTURE(text);
    const auto s = make_system(text);
    SplitMix64 rng(3);
    for (int k = 0; k < 30; ++k) {
      const PhasePoint p = s->random_point(rng), q = s->random_point(rng);
      CHECK(s->dist(p, q) == doctest::Approx(s->dist(q, p)).epsilon(1e-12));
      CHECK(s->dist(p, p) < 1e-12);
      CHECK(s->dist(p, q) <= s->diameter() + 1e-12);
    }
  }
}

TEST_CASE("orbit sampling") {
  const auto r = make_system("rotation:alpha=0.25");
  const OrbitSample o = sample_orbit(*r, CirclePoint{0.0}, 5, 1);
  REQUIRE(o.size() == 5);
  CHECK(o.times[0] == 0.0);
  CHECK(circle(o.points[4]) == doctest::Approx(0.0));

  const auto s = make_system("suspend(rotation:alpha=0.6180339887)");
  const OrbitSample f = sample_orbit(*s, FiberPoint{CirclePoint{0.2}, 0.0}, 2.0, 0.5);
  REQUIRE(f.size() == 4);
  const double heights[] = {0.0, 0.5, 0.0, 0.5};
  for (int k = 0; k < 4; ++k) CHECK(fiber(f.points[k]).height == doctest::Approx(heights[k]).epsilon(1e-12));
  CHECK(circle(to_phase(fiber(f.points[2]).base)) == doctest::Approx(0.8180339887));

  CHECK_THROWS(sample_orbit(*s, FiberPoint{CirclePoint{0.2}, 0.0}, 0.0, 0.5));
}

TEST_CASE("flow orbit samples track evolve from the origin") {
  const auto s = make_system("timechange(suspend(rotation:alpha=0.6180339887);rate=cos:c=1,a=0.3)");
  SplitMix64 rng(2);
  const PhasePoint p = s->random_point(rng);
  const OrbitSample o = sample_orbit(*s, p, 20.0, 0.05);
  for (std::size_t k = 0; k < o.size(); k += 37) CHECK(s->dist(o.points[k], s->evolve(p, o.times[k])) < 1e-6);
}

TEST_CASE("points outside the phase space are rejected") {
  const auto s = make_system("suspend(rotation:alpha=0.3)");
  CHECK_THROWS_AS(s->check_point(FiberPoint{CirclePoint{0.2}, 1.5}), UsageError);
  CHECK_THROWS_AS(s->parse_point("0.2@1.5"), UsageError);
  CHECK(std::get<FiberPoint>(s->parse_point("0.2")).height == 0.0);
  CHECK_THROWS_AS(make_system("rotation:alpha=0.3")->check_point(CirclePoint{1.5}), UsageError);
}
