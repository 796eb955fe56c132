#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fixtures.hpp"
#include "fk/errors.hpp"
#include "fk/partitions.hpp"
#include "fk/systems.hpp"
#include "oracles.hpp"

using namespace fk;

namespace {

const char* kSusp = "suspend(rotation:alpha=0.6180339887)";

std::vector<PhasePoint> circle_grid(std::size_t n) {
  std::vector<PhasePoint> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(CirclePoint{(static_cast<double>(k) + 0.5) / static_cast<double>(n)});
  return out;
}

std::vector<std::size_t> random_labels(SplitMix64& rng, std::size_t count, std::size_t cells) {
  std::vector<std::size_t> out(count);
  for (auto& l : out) l = rng.below(cells);
  return out;
}

}  // namespace

TEST_CASE("grid partitions") {
  const auto circle = make_system("rotation:alpha=0.3");
  const Partition halves = grid_partition(circle, 2);
  CHECK(halves.size() == 2);
  CHECK(halves.label(CirclePoint{0.2}) == 0);
  CHECK(halves.label(CirclePoint{0.5}) == 1);
  CHECK(halves.label(CirclePoint{0.99}) == 1);
  CHECK(grid_partition(make_system("torus:alpha1=0.1,alpha2=0.2"), 3).size() == 9);
  CHECK(grid_partition(make_system(kSusp), 8).size() == 64);
  CHECK_THROWS_AS(grid_partition(circle, 1), UsageError);
  CHECK_THROWS_AS(parse_partition(circle, "grid:k=1"), ConfigError);
  CHECK_THROWS_AS(grid_partition(make_system("shift:arity=2,window=8"), 4), UsageError);

  // Arithmetic labels agree with the cell boxes.
  const auto s = make_system(kSusp);
  const Partition g = grid_partition(s, 5);
  for (const auto& p : fixture::sample(*s, 200, 3)) {
    const auto c = s->coordinates(p);
    const auto& boxes = g.cell(g.label(p)).boxes;
    CHECK(std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(c); }));
  }
}

TEST_CASE("partition files") {
  const auto circle = make_system("rotation:alpha=0.3");
  const Partition p = parse_partition_text(circle, "# two arcs\ncell A box 0 0.4\ncell B box 0.4 1\n", "t");
  CHECK(p.size() == 2);
  CHECK(p.label(CirclePoint{0.1}) == 0);
  CHECK(p.label(CirclePoint{0.7}) == 1);
  const Partition q = parse_partition_text(circle, "cell A box 0 0.2\ncell B box 0.2 1\ncell A box 0.9 1.0\n", "t");
  CHECK_THROWS_AS(q.label(CirclePoint{0.95}), UsageError);

  auto error_at = [&](const char* text) {
    try {
      parse_partition_text(circle, text, "t");
    } catch (const ConfigError& e) {
      return std::make_pair(e.line(), e.column());
    }
    return std::make_pair(0, 0);
  };
  CHECK(error_at("cell A box 0 0.5\nzone B box 0.5 1\n") == std::make_pair(2, 1));
  CHECK(error_at("cell A box 0 0.5\ncell B box 0.5 x\n") == std::make_pair(2, 16));
  CHECK(error_at("cell A box 0.5 0.2\ncell B box 0 1\n") == std::make_pair(1, 12));
  CHECK(error_at("cell A box 0 1\n") != std::make_pair(0, 0));

  const std::string path = "fk_partition_test.txt";
  {
    std::ofstream out(path);
    out << "cell L box 0 0.5\ncell R box 0.5 1\n";
  }
  CHECK(parse_partition(circle, "file:" + path).size() == 2);
  std::remove(path.c_str());
  CHECK_THROWS_AS(parse_partition(circle, "file:/nonexistent/partition.txt"), IoError);
  CHECK_THROWS_AS(parse_partition(circle, "voronoi:k=3"), ConfigError);
}

TEST_CASE("d_mu examples") {
  const auto circle = make_system("rotation:alpha=0.3");
  const EmpiricalMeasure sample = uniform_measure(circle_grid(10000));
  const Partition halves = grid_partition(circle, 2);
  CHECK(d_mu(halves, halves, sample) == 0.0);
  const Partition uneven = parse_partition_text(circle, "cell A box 0 0.4\ncell B box 0.4 1\n", "t");
  CHECK(d_mu(halves, uneven, sample) == doctest::Approx(0.1).epsilon(1e-3));
}

TEST_CASE("assignment agrees with permutation search") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t np = 1 + rng.below(6), nq = 1 + rng.below(6), count = 1 + rng.below(40);
    const auto lp = random_labels(rng, count, np), lq = random_labels(rng, count, nq);
    CHECK(d_mu_from_labels(lp, np, lq, nq) == oracle::d_mu(lp, lq, std::max(np, nq)));
  }
}

TEST_CASE("d_mu is a pseudometric on label vectors") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(5), count = 5 + rng.below(60);
    const auto a = random_labels(rng, count, n), b = random_labels(rng, count, n), c = random_labels(rng, count, n);
    const double ab = d_mu_from_labels(a, n, b, n), bc = d_mu_from_labels(b, n, c, n), ac = d_mu_from_labels(a, n, c, n);
    CHECK(d_mu_from_labels(a, n, a, n) == 0.0);
    CHECK(ab == d_mu_from_labels(b, n, a, n));
    CHECK(ac <= ab + bc + 1e-12);
  }
}

TEST_CASE("essentialize leaves open partitions alone") {
  const auto s = make_system(kSusp);
  const Partition g = grid_partition(s, 3);
  const EmpiricalMeasure sample = uniform_measure(fixture::sample(*s, 400, 1));
  const Partition e = essentialize(g, 0.1, sample);
  CHECK(e.size() == g.size());
  CHECK_FALSE(e.rest());
  CHECK(d_mu(g, e, sample) == 0.0);
  CHECK_THROWS_AS(essentialize(g, 0.1, uniform_measure(fixture::sample(*s, 100, 1))), RefusalError);
}

TEST_CASE("essentialize yields an essentially open partition close in d_mu") {
  const auto s = make_system(kSusp);
  SplitMix64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    const Partition p = fixture::perturbed_grid(s, rng, 2 + static_cast<int>(trial % 2));
    const EmpiricalMeasure sample = uniform_measure(fixture::sample(*s, 500, 100 + trial));
    const double eps = 0.1;
    const Partition e = essentialize(p, eps, sample);
    REQUIRE(e.rest());
    CHECK(essentially_open(e, eps, sample.atoms));
    CHECK(cell_masses(e, sample.atoms)[*e.rest()] < eps);
    CHECK(d_mu(p, e, sample) < eps);
    // Open cells are balls; distinct cells stay disjoint on fresh points.
    for (const auto& q : fixture::sample(*s, 100, 999)) CHECK_NOTHROW(e.label(q));
  }
}

TEST_CASE("two-cell partition with a fat boundary anomaly") {
  const auto circle = make_system("rotation:alpha=0.3");
  Partition p("anomaly", circle);
  p.add_cell(Cell{"left", true, {Box{{0.0}, {0.45}}}, {}});
  p.add_cell(Cell{"band", false, {Box{{0.45}, {0.55}}}, {}});
  p.add_cell(Cell{"right", true, {Box{{0.55}, {1.0}}}, {}});
  const EmpiricalMeasure sample = uniform_measure(fixture::sample(*circle, 1000, 2));
  const Partition e = essentialize(p, 0.1, sample);
  REQUIRE(e.rest());
  CHECK(cell_masses(e, sample.atoms)[*e.rest()] < 0.1);
  CHECK(d_mu(p, e, sample) < 0.1);
}

TEST_CASE("label compatibility and Ratner gaps") {
  const auto s = make_system(kSusp);
  const Partition g = grid_partition(s, 8);
  const PhasePoint x = FiberPoint{CirclePoint{0.31}, 0.42};
  CHECK(ratner_gap(*s, x, x, 30.0, g) <= kDefaultBisectionTol);
  const double r = 0.6, t = 30.0;
  CHECK(ratner_gap(*s, x, s->evolve(x, -r), t, g) <= r / t + kDefaultBisectionTol);

  Partition one("one", s);
  one.add_cell(Cell{"all", true, {}, [](const PhasePoint&) { return true; }});
  CHECK(ratner_gap(*s, x, FiberPoint{CirclePoint{0.9}, 0.1}, t, one) <= kDefaultBisectionTol);

  LabelTrack a{{0, 1, 2}, 0.05, 0.15}, b{{2, 0, 1}, 0.05, 0.15};
  const BitMatrix c = label_compat(a, b);
  CHECK(c.get(0, 1));
  CHECK(c.get(2, 0));
  CHECK_FALSE(c.get(0, 0));
}

TEST_CASE("ball membership") {
  SplitMix64 rng(21);
  const LabelTrack center = fixture::random_track(rng, 400, 4, 10);
  for (double eps : {0.01, 0.1, 0.5}) CHECK(ball_member_tracks(center, center, eps));
  LabelTrack other = center;
  for (auto& l : other.labels) l += 10;
  CHECK_FALSE(ball_member_tracks(center, other, 0.5));
}

TEST_CASE("members of one ball are 5 eps close") {
  const auto s = make_system(kSusp);
  const Partition g = grid_partition(s, 4);
  const auto pts = fixture::sample(*s, 60, 4);
  const double t = 30.0, eps = 0.1;
  std::vector<LabelTrack> tracks;
  for (const auto& p : pts) tracks.push_back(label_track(g, sample_orbit(*s, p, t, 0.05)));
  const auto member = ball_matrix(tracks, eps);
  int checked = 0;
  for (std::size_t c = 0; c < pts.size() && checked < 40; ++c)
    for (std::size_t z = 0; z < pts.size(); ++z)
      for (std::size_t y = z + 1; y < pts.size(); ++y)
        if (member[c][z] && member[c][y] && z != c && y != c && checked < 40) {
          ++checked;
          CHECK(ratner_gap_tracks(tracks[z], tracks[y], kDefaultBisectionTol).value <= 5 * eps + kDefaultBisectionTol);
        }
  MESSAGE("ball pairs checked: " << checked);
}

TEST_CASE("ball matrices grow with eps and shrink under refinement") {
  const auto s = make_system(kSusp);
  const auto pts = fixture::sample(*s, 40, 8);
  const Partition coarse = grid_partition(s, 4), fine = grid_partition(s, 8);
  std::vector<LabelTrack> tc, tf;
  for (const auto& p : pts) {
    const OrbitSample o = sample_orbit(*s, p, 20.0, 0.05);
    tc.push_back(label_track(coarse, o));
    tf.push_back(label_track(fine, o));
  }
  const auto small = ball_matrix(tc, 0.05), large = ball_matrix(tc, 0.2), refined = ball_matrix(tf, 0.2);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = 0; b < pts.size(); ++b) {
      CHECK(large[a][b] == (large[a][b] || small[a][b]));
      // fine[i] == fine[j] implies coarse[i] == coarse[j] since 4 divides 8.
      CHECK(large[a][b] == (large[a][b] || refined[a][b]));
    }
}

TEST_CASE("greedy cover") {
  std::vector<std::vector<bool>> full(10, std::vector<bool>(10, true));
  const CoverResult one = greedy_cover(full, 0.9);
  CHECK(one.count == 1);
  CHECK(one.centers == std::vector<std::size_t>{0});
  CHECK(one.covered == 1.0);

  std::vector<std::vector<bool>> id(10, std::vector<bool>(10, false));
  for (std::size_t k = 0; k < 10; ++k) id[k][k] = true;
  const CoverResult many = greedy_cover(id, 0.5);
  CHECK(many.count == 6);
  CHECK(many.covered == doctest::Approx(0.6));

  std::vector<std::vector<bool>> none(4, std::vector<bool>(4, false));
  CHECK(greedy_cover(none, 0.5).shortfall);

  // Two clusters {0,1,2} and {3,4}: the larger cluster goes first.
  std::vector<std::vector<bool>> two(5, std::vector<bool>(5, false));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = 0; b < 5; ++b) two[a][b] = (a < 3) == (b < 3);
  const CoverResult c2 = greedy_cover(two, 0.9);
  CHECK(c2.centers == std::vector<std::size_t>{0, 3});
}

TEST_CASE("covering numbers need a reasonable sample") {
  const auto s = make_system(kSusp);
  const Partition g = grid_partition(s, 4);
  CHECK_THROWS_AS(covering_number(*s, fixture::sample(*s, 10, 1), 20.0, 0.1, g, 0.9), UsageError);
  const auto r = covering_number(*s, fixture::sample(*s, 50, 1), 20.0, 0.1, g, 0.9);
  CHECK(r.count >= 1);
  CHECK(r.covered > 0.9);
  CHECK(to_json(r).at("upper_bound").get<bool>());
}

TEST_CASE("beta curves") {
  const std::vector<double> t = {4, 8, 12, 16, 20, 24, 28, 32};
  std::vector<std::size_t> ones(t.size(), 1);
  CHECK(beta_from_counts(t, ones, UFunction::parse("identity")).tail_inf == 0.0);
  std::vector<std::size_t> exp2;
  for (double v : t) exp2.push_back(static_cast<std::size_t>(std::ldexp(1.0, static_cast<int>(v))));
  CHECK(beta_from_counts(t, exp2, UFunction::parse("identity")).tail_inf == doctest::Approx(std::log(2.0)));
  CHECK(UFunction::parse("sqrt")(16.0) == 4.0);
  CHECK(UFunction::parse("log").name() == "log");
  CHECK_THROWS_AS(UFunction::parse("cube"), ConfigError);
  CHECK_THROWS_AS(beta_from_counts({1, 2}, {1, 1}, UFunction()), UsageError);

  const ESurrogate e = e_surrogate({{0.1, 0.3}, {0.2, 0.05}}, {0.1, 0.05}, {"grid:k=4", "grid:k=8"});
  CHECK(e.e_u_p == std::vector<double>{0.3, 0.2});
  CHECK(e.e_phi_u == 0.3);
}

TEST_CASE("transfer with identical partitions keeps the matching") {
  SplitMix64 rng(3);
  const LabelTrack q = fixture::random_track(rng, 600, 4, 12);
  const LabelTrack qy = fixture::shifted(q, 3);
  const FtildeResult f = ratner_gap_tracks(q, qy, kDefaultBisectionTol, true);
  REQUIRE(f.certificate);
  const TransferResult r = transfer_matching(*f.certificate, q, q, qy, qy, 0.0, 0.1);
  CHECK(r.in_h);
  CHECK(r.epsilon_prime == f.certificate->epsilon);
  CHECK(r.matching == *f.certificate);
}

TEST_CASE("transfer with an empty agreement set is infeasible") {
  SplitMix64 rng(4);
  const LabelTrack q = fixture::random_track(rng, 300, 3, 10);
  const FtildeResult f = ratner_gap_tracks(q, q, kDefaultBisectionTol, true);
  REQUIRE(f.certificate);
  LabelTrack p = q;
  for (auto& l : p.labels) l = 7;
  const TransferResult r = transfer_matching(*f.certificate, p, q, p, q, 1.0, 0.1);
  CHECK_FALSE(r.feasible);
  CHECK(r.epsilon_prime == 1.0);
}

TEST_CASE("transfer bound on constructed disagreement") {
  SplitMix64 rng(9);
  int in_h = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const LabelTrack qx = fixture::random_track(rng, 800, 4, 15);
    const LabelTrack qy = fixture::shifted(qx, static_cast<long>(rng.below(7)) - 3);
    const FtildeResult f = ratner_gap_tracks(qx, qy, kDefaultBisectionTol, true);
    REQUIRE(f.certificate);
    const LabelTrack px = fixture::perturbed(rng, qx, 0.05, 4), py = fixture::perturbed(rng, qy, 0.05, 4);
    const TransferResult r = transfer_matching(*f.certificate, px, qx, py, qy, 0.05, 0.1);
    if (!r.in_h) continue;
    ++in_h;
    CHECK(r.within_bound);
    CHECK(r.epsilon_prime <= 4 * f.certificate->epsilon + 2 * 0.05 + 0.1 + kTransferSlack);
    if (r.feasible) {
      const CheckResult c = check_label_matching(px, py, r.matching, r.epsilon_prime);
      CHECK_MESSAGE(c.ok, c.reason);
    }
  }
  CHECK(in_h > 10);
}

TEST_CASE("transfer rejects matchings that are not certified") {
  SplitMix64 rng(10);
  const LabelTrack q = fixture::random_track(rng, 200, 3, 10);
  ContMatching h;
  h.t = 10.0;
  h.epsilon = 0.1;
  h.knots = {{0.0, 0.0}, {10.0, 10.0}};
  h.segments = {{0, 1}};
  h.coverage = h.coverage_y = 10.0;
  LabelTrack other = q;
  for (auto& l : other.labels) l = (l + 1) % 3;
  CHECK_THROWS_AS(transfer_matching(h, q, q, other, other, 0.0, 0.1), UsageError);
}
