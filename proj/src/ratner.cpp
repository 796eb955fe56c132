#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fk/errors.hpp"
#include "fk/partitions.hpp"

namespace fk {

LabelTrack label_track(const Partition& p, const OrbitSample& orbit) {
  LabelTrack t;
  t.labels = p.labels(orbit.points);
  t.step = orbit.step;
  t.horizon = orbit.horizon;
  return t;
}

BitMatrix label_compat(const LabelTrack& x, const LabelTrack& y) {
  if (x.step != y.step) throw UsageError(fmt::format("track steps differ ({} vs {})", x.step, y.step));
  const std::size_t m = std::min(x.size(), y.size());
  std::size_t labels = 0;
  for (std::size_t k = 0; k < m; ++k) labels = std::max({labels, x.labels[k] + 1, y.labels[k] + 1});
  // One bit row per label marking the y positions carrying it.
  BitMatrix by(labels, m);
  for (std::size_t j = 0; j < m; ++j) by.set(y.labels[j], j);
  BitMatrix c(m, m);
  for (std::size_t i = 0; i < m; ++i) std::memcpy(c.row(i), by.row(x.labels[i]), c.words() * sizeof(std::uint64_t));
  return c;
}

namespace {

std::size_t track_length(const LabelTrack& x, const LabelTrack& y) {
  if (x.step != y.step) throw UsageError(fmt::format("track steps differ ({} vs {})", x.step, y.step));
  if (x.size() != y.size()) throw UsageError(fmt::format("track lengths differ ({} vs {})", x.size(), y.size()));
  if (x.size() == 0) throw UsageError("empty label track");
  return x.size();
}

std::size_t grid_samples(double t, double step) {
  if (!(step > 0.0 && step <= 0.1)) throw UsageError(fmt::format("grid step must lie in (0, 0.1], got {}", step));
  if (!(t > 1.0)) throw UsageError(fmt::format("horizon t must exceed 1, got {}", t));
  return static_cast<std::size_t>(std::floor(t / step + 1e-9));
}

LabelTrack track_of(const System& system, const PhasePoint& x, double t, const Partition& p, double step) {
  if (!system.is_flow()) throw UsageError("Ratner matchings are defined for flows");
  const std::size_t m = grid_samples(t, step);
  return label_track(p, sample_orbit(system, x, static_cast<double>(m) * step, step));
}

}  // namespace

FtildeResult ratner_gap_tracks(const LabelTrack& x, const LabelTrack& y, double tol, bool want_certificate) {
  const std::size_t m = track_length(x, y);
  return ftilde_from_compat(label_compat(x, y), m, x.step, tol, std::nullopt, want_certificate);
}

double ratner_gap(const System& system, const PhasePoint& x, const PhasePoint& y, double t, const Partition& p,
                  double step, double tol) {
  return ratner_gap_tracks(track_of(system, x, t, p, step), track_of(system, y, t, p, step), tol).value;
}

bool ball_member_tracks(const LabelTrack& center, const LabelTrack& y, double eps) {
  if (!(eps > 0.0)) throw UsageError(fmt::format("ball radius must be positive, got {}", eps));
  const std::size_t m = track_length(center, y);
  const double level = std::min(eps * (1.0 - kBallMargin), kEpsilonCeiling);
  return slope_dp(label_compat(center, y), m, center.step, level, false).feasible;
}

bool ball_member(const System& system, const PhasePoint& y, const PhasePoint& center, double t, double eps,
                 const Partition& p, double step) {
  return ball_member_tracks(track_of(system, center, t, p, step), track_of(system, y, t, p, step), eps);
}

namespace {

// Index of the sample nearest to time u; ties round up.
std::size_t nearest_sample(double u, double step) {
  return static_cast<std::size_t>(std::max(0.0, std::floor(u / step + 0.5 + 1e-9)));
}

// First x-sample index at or after s.
std::size_t first_sample_from(double s, double step) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(s / step - 1e-9)));
}

}  // namespace

CheckResult check_label_matching(const LabelTrack& x, const LabelTrack& y, const ContMatching& h, double epsilon) {
  CheckResult r;
  auto fail = [&](std::string why) {
    if (r.ok) {
      r.ok = false;
      r.reason = std::move(why);
    }
  };
  const double step = x.step;
  if (y.step != step) fail("track steps differ");
  const double t = h.t;
  const double fuzz = 1e-9 * std::max(1.0, t);
  r.min_slope = std::numeric_limits<double>::infinity();
  r.max_slope = -std::numeric_limits<double>::infinity();
  std::size_t prev_last = 0;
  for (std::size_t s = 0; s < h.segments.size(); ++s) {
    const auto [a, b] = h.segments[s];
    if (a >= b || b >= h.knots.size()) {
      fail(fmt::format("segment {} has invalid knot range [{}, {}]", s, a, b));
      continue;
    }
    if (s > 0) {
      if (a <= prev_last) fail(fmt::format("segment {} overlaps its predecessor", s));
      else if (h.knots[a].first < h.knots[prev_last].first || h.knots[a].second < h.knots[prev_last].second)
        fail(fmt::format("segment {} starts before the previous one ends", s));
    }
    prev_last = b;
    if (h.knots[a].first < -fuzz || h.knots[a].second < -fuzz || h.knots[b].first > t + fuzz ||
        h.knots[b].second > t + fuzz)
      fail(fmt::format("segment {} leaves [0, t]", s));
    for (std::size_t k = a; k < b; ++k) {
      const auto [s0, u0] = h.knots[k];
      const auto [s1, u1] = h.knots[k + 1];
      if (!(s1 > s0) || !(u1 > u0)) {
        fail(fmt::format("knots {} and {} are not strictly increasing", k, k + 1));
        continue;
      }
      const double slope = (u1 - u0) / (s1 - s0);
      r.min_slope = std::min(r.min_slope, slope);
      r.max_slope = std::max(r.max_slope, slope);
      if (!(slope > 1.0 - epsilon && slope < 1.0 + epsilon))
        fail(fmt::format("slope {} on piece {} outside ({}, {})", slope, k, 1.0 - epsilon, 1.0 + epsilon));
      r.coverage += s1 - s0;
      r.coverage_y += u1 - u0;
      for (std::size_t i = first_sample_from(s0, step); static_cast<double>(i) * step < s1 - fuzz; ++i) {
        const std::size_t j = nearest_sample(u0 + slope * (static_cast<double>(i) * step - s0), step);
        if (i >= x.size() || j >= y.size()) {
          fail(fmt::format("sample pair ({}, {}) outside the tracks", i, j));
          break;
        }
        if (x.labels[i] != y.labels[j])
          fail(fmt::format("labels differ at samples ({}, {}): {} vs {}", i, j, x.labels[i], y.labels[j]));
      }
    }
  }
  if (std::fabs(r.coverage - h.coverage) > fuzz)
    fail(fmt::format("claimed coverage {} but segments cover {}", h.coverage, r.coverage));
  if (std::fabs(r.coverage_y - h.coverage_y) > fuzz)
    fail(fmt::format("claimed image coverage {} but segments cover {}", h.coverage_y, r.coverage_y));
  if (!(r.coverage > (1.0 - epsilon) * t))
    fail(fmt::format("coverage {} not above (1 - {}) * {}", r.coverage, epsilon, t));
  if (!(r.coverage_y > (1.0 - epsilon) * t))
    fail(fmt::format("image coverage {} not above (1 - {}) * {}", r.coverage_y, epsilon, t));
  if (h.segments.empty()) r.min_slope = r.max_slope = 1.0;
  return r;
}

namespace {

double disagreement(const LabelTrack& p, const LabelTrack& q, std::vector<char>& agree) {
  agree.assign(p.size(), 0);
  std::size_t bad = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    agree[k] = p.labels[k] == q.labels[k];
    bad += agree[k] ? 0 : 1;
  }
  return static_cast<double>(bad) / static_cast<double>(p.size());
}

}  // namespace

TransferResult transfer_matching(const ContMatching& h, const LabelTrack& px, const LabelTrack& qx,
                                 const LabelTrack& py, const LabelTrack& qy, double d_pq, double delta) {
  const double step = px.step;
  if (qx.step != step || py.step != step || qy.step != step) throw UsageError("label tracks use different steps");
  const std::size_t m = px.size();
  if (qx.size() != m || py.size() != m || qy.size() != m)
    throw UsageError(fmt::format("label tracks differ in length ({}, {}, {}, {})", px.size(), qx.size(), py.size(),
                                 qy.size()));
  if (m == 0) throw UsageError("empty label tracks");
  if (std::fabs(h.t - static_cast<double>(m) * step) > 1e-9 * std::max(1.0, h.t))
    throw UsageError(fmt::format("matching horizon {} does not match {} samples of step {}", h.t, m, step));
  for (const auto& [s, u] : h.knots) {
    const double cells = s / step;
    if (std::fabs(cells - std::round(cells)) > 1e-6)
      throw UsageError(fmt::format("knot at s = {} is off the sampling grid of step {}", s, step));
  }
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  if (!(d_pq >= 0.0 && d_pq <= 1.0)) throw UsageError(fmt::format("d_PQ must lie in [0, 1], got {}", d_pq));
  const auto q_check = check_label_matching(qx, qy, h, h.epsilon);
  if (!q_check.ok) throw UsageError("input is not a certified Q-matching: " + q_check.reason);

  TransferResult r;
  const double eps = h.epsilon;
  const double t = h.t;
  std::vector<char> cx, cy;
  r.freq_x = disagreement(px, qx, cx);
  r.freq_y = disagreement(py, qy, cy);
  r.in_h = std::fabs(r.freq_x - d_pq) < delta / 2.0 && std::fabs(r.freq_y - d_pq) < delta / 2.0;
  r.bound = 4.0 * eps + 2.0 * d_pq + delta;
  r.slack = kTransferSlack;

  ContMatching& out = r.matching;
  bool removed = false;
  out.t = t;
  out.delta = h.delta;
  for (const auto& [a, b] : h.segments) {
    bool open = false;
    for (std::size_t k = a; k < b; ++k) {
      const auto [s0, u0] = h.knots[k];
      const auto [s1, u1] = h.knots[k + 1];
      const double slope = (u1 - u0) / (s1 - s0);
      const std::size_t i_end = static_cast<std::size_t>(std::llround(s1 / step));
      for (std::size_t i = static_cast<std::size_t>(std::llround(s0 / step)); i < i_end; ++i) {
        const double s = static_cast<double>(i) * step;
        const std::size_t j = nearest_sample(u0 + slope * (s - s0), step);
        const bool keep = cx[i] && j < m && cy[j];
        if (!keep) {
          removed = true;
          open = false;
          continue;
        }
        const double se = s + step;
        const double ue = u0 + slope * (se - s0);
        if (!open) {
          out.knots.emplace_back(s, u0 + slope * (s - s0));
          out.segments.emplace_back(out.knots.size() - 1, out.knots.size() - 1);
          open = true;
        } else if (i != static_cast<std::size_t>(std::llround(s0 / step))) {
          out.knots.pop_back();  // interior point of a linear piece
        }
        out.knots.emplace_back(se, i + 1 == i_end ? u1 : ue);
        out.segments.back().second = out.knots.size() - 1;
      }
    }
  }
  for (const auto& [a, b] : out.segments) {
    out.coverage += out.knots[b].first - out.knots[a].first;
    out.coverage_y += out.knots[b].second - out.knots[a].second;
  }

  const double lost = 1.0 - std::min(out.coverage, out.coverage_y) / t;
  r.feasible = out.coverage > 0.0 && lost < 1.0;
  if (!r.feasible) {
    r.epsilon_prime = 1.0;
  } else {
    r.epsilon_prime = std::max(eps, lost + 1e-12);
    if (r.epsilon_prime >= 1.0) {
      r.epsilon_prime = 1.0;
      r.feasible = false;
    }
  }
  out.epsilon = r.epsilon_prime;
  if (r.feasible && !removed) out = h;
  r.within_bound = r.epsilon_prime <= r.bound + r.slack;
  return r;
}

}  // namespace fk
