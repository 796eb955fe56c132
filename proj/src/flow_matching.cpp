#include "fk/flow_matching.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "fk/errors.hpp"
#include "fk/parallel.hpp"

namespace fk {

nlohmann::json to_json(const ContMatching& h) {
  nlohmann::json knots = nlohmann::json::array();
  for (const auto& [s, u] : h.knots) knots.push_back({s, u});
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& [a, b] : h.segments) segments.push_back({a, b});
  return {{"t", h.t},
          {"epsilon", h.epsilon},
          {"delta", h.delta},
          {"coverage", h.coverage},
          {"coverage_y", h.coverage_y},
          {"knots", knots},
          {"segments", segments}};
}

ContMatching cont_matching_from_json(const nlohmann::json& j) {
  ContMatching h;
  h.t = j.at("t").get<double>();
  h.epsilon = j.at("epsilon").get<double>();
  h.delta = j.at("delta").get<double>();
  h.coverage = j.at("coverage").get<double>();
  h.coverage_y = j.at("coverage_y").get<double>();
  for (const auto& k : j.at("knots")) h.knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
  for (const auto& s : j.at("segments")) h.segments.emplace_back(s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>());
  return h;
}

namespace {

enum Move : std::uint8_t { kNone = 0, kDiag = 1, kDriftX = 2, kDriftY = 3, kSkipX = 4, kSkipY = 5 };

constexpr std::int32_t kInf = std::numeric_limits<std::int32_t>::max() / 4;

struct MoveShape {
  long dx;
  long dy;
  bool matched;
};

MoveShape shape(Move mv, long L) {
  switch (mv) {
    case kDiag:
      return {1, 1, true};
    case kDriftX:
      return {L, L + 1, true};
    case kDriftY:
      return {L + 1, L, true};
    case kSkipX:
      return {1, 0, false};
    case kSkipY:
      return {0, 1, false};
    default:
      return {0, 0, false};
  }
}

ContMatching build_matching(const std::vector<Move>& moves, long L, double step, std::size_t m, double eps) {
  ContMatching h;
  h.t = static_cast<double>(m) * step;
  h.epsilon = eps;
  long i = 0, j = 0;
  long mx = 0, my = 0;
  bool open = false;
  Move last = kNone;
  for (Move mv : moves) {
    const MoveShape s = shape(mv, L);
    if (s.matched) {
      if (!open) {
        h.knots.emplace_back(static_cast<double>(i) * step, static_cast<double>(j) * step);
        h.segments.emplace_back(h.knots.size() - 1, h.knots.size() - 1);
        open = true;
      } else if (mv == kDiag && last == kDiag) {
        h.knots.pop_back();  // collinear with the previous diagonal piece
      }
      i += s.dx;
      j += s.dy;
      mx += s.dx;
      my += s.dy;
      h.knots.emplace_back(static_cast<double>(i) * step, static_cast<double>(j) * step);
      h.segments.back().second = h.knots.size() - 1;
    } else {
      open = false;
      i += s.dx;
      j += s.dy;
    }
    last = mv;
  }
  h.coverage = static_cast<double>(mx) * step;
  h.coverage_y = static_cast<double>(my) * step;
  return h;
}

}  // namespace

SlopeDpResult slope_dp(const BitMatrix& compat, std::size_t m_size, double step, double eps, bool want_path) {
  if (m_size == 0) throw UsageError("slope DP needs at least one sample");
  if (compat.rows() < m_size || compat.cols() < m_size)
    throw UsageError(fmt::format("compatibility matrix {}x{} smaller than {} samples", compat.rows(), compat.cols(), m_size));
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError(fmt::format("epsilon must lie in (0,1), got {}", eps));
  const long m = static_cast<long>(m_size);
  const long L_raw = static_cast<long>(std::floor(1.0 / eps)) + 1;
  const bool drifts = L_raw + 1 <= m;
  const long L = drifts ? L_raw : 0;
  const long k0 = (L + 1) / 2;
  // A feasible path pays at least |i - j| to leave the diagonal and as much to
  // return, so it stays within |i - j| < eps m.
  const long W = std::min<long>(static_cast<long>(std::ceil(eps * static_cast<double>(m))) + 1, m);
  const long BW = 2 * W + 7;
  const long R = drifts ? L + 2 : 2;
  const double limit = 2.0 * eps * static_cast<double>(m);

  std::vector<std::int32_t> cost(static_cast<std::size_t>(R * BW), kInf);
  std::vector<std::uint16_t> run(static_cast<std::size_t>(R * BW), 0);
  auto slot = [&](long r, long c) { return static_cast<std::size_t>((r % R) * BW + (c - r + W + 3)); };
  auto C = [&](long i, long j) -> std::int32_t { return cost[slot(i, j)]; };
  auto B = [&](long a, long b) -> long { return (a < 0 || b < 0) ? 0 : run[slot(a, b)]; };

  std::vector<std::size_t> row_start;
  std::vector<long> row_lo;
  std::vector<Move> codes;
  if (want_path) {
    row_start.resize(static_cast<std::size_t>(m) + 2);
    row_lo.resize(static_cast<std::size_t>(m) + 1);
  }

  for (long i = 0; i <= m; ++i) {
    if (i >= 1) {
      // Diagonal run lengths of cell row a = i - 1.
      const long a = i - 1;
      std::fill_n(run.begin() + static_cast<std::ptrdiff_t>((a % R) * BW), BW, std::uint16_t{0});
      const long blo = std::max(0L, a - W - 3);
      const long bhi = std::min(m - 1, a + W + 3);
      for (long b = blo; b <= bhi; ++b)
        if (compat.get(static_cast<std::size_t>(a), static_cast<std::size_t>(b))) {
          const long prev = (a > 0 && b > 0 && b - 1 >= a - 1 - W - 3) ? B(a - 1, b - 1) : 0;
          run[slot(a, b)] = static_cast<std::uint16_t>(std::min<long>(prev + 1, 65535));
        }
    }
    std::fill_n(cost.begin() + static_cast<std::ptrdiff_t>((i % R) * BW), BW, kInf);
    const long lo = std::max(0L, i - W);
    const long hi = std::min(m, i + W);
    if (want_path) {
      row_lo[static_cast<std::size_t>(i)] = lo;
      row_start[static_cast<std::size_t>(i)] = codes.size();
      codes.resize(codes.size() + static_cast<std::size_t>(hi - lo + 1), kNone);
    }
    long row_bound = kInf;
    for (long j = lo; j <= hi; ++j) {
      std::int32_t best = kInf;
      Move mv = kNone;
      if (i == 0 && j == 0) {
        best = 0;
      } else {
        if (i >= 1 && j >= 1 && B(i - 1, j - 1) >= 1) {
          const std::int32_t c = C(i - 1, j - 1);
          if (c < best) best = c, mv = kDiag;
        }
        if (drifts && B(i - 1, j - 1) >= L - k0) {
          if (i >= L && j >= L + 1) {
            const long i0 = i - L, j0 = j - L - 1;
            if (B(i0 + k0, j0 + k0) >= k0 + 1) {
              const std::int32_t c = C(i0, j0) + 1;
              if (c < best) best = c, mv = kDriftX;
            }
          }
          if (i >= L + 1 && j >= L) {
            const long i0 = i - L - 1, j0 = j - L;
            if (B(i0 + k0, j0 + k0) >= k0 + 1) {
              const std::int32_t c = C(i0, j0) + 1;
              if (c < best) best = c, mv = kDriftY;
            }
          }
        }
        if (i >= 1) {
          const std::int32_t c = C(i - 1, j) + 1;
          if (c < best) best = c, mv = kSkipX;
        }
        if (j >= 1) {
          const std::int32_t c = C(i, j - 1) + 1;
          if (c < best) best = c, mv = kSkipY;
        }
      }
      cost[slot(i, j)] = best;
      if (want_path) codes[row_start[static_cast<std::size_t>(i)] + static_cast<std::size_t>(j - lo)] = mv;
      if (best < kInf) row_bound = std::min<long>(row_bound, best + std::labs(i - j));
    }
    // Costs never decrease along a path and returning to the diagonal costs
    // |i - j| more, so this row bounds the final cost from below.
    if (!want_path && static_cast<double>(row_bound) >= limit) {
      SlopeDpResult early;
      early.cost = row_bound;
      return early;
    }
  }

  SlopeDpResult r;
  r.cost = C(m, m);
  r.feasible = static_cast<double>(r.cost) < limit;
  if (!want_path || r.cost >= kInf) return r;

  std::vector<Move> moves;
  long i = m, j = m;
  while (i > 0 || j > 0) {
    const Move mv = codes[row_start[static_cast<std::size_t>(i)] + static_cast<std::size_t>(j - row_lo[static_cast<std::size_t>(i)])];
    const MoveShape s = shape(mv, L);
    if (s.dx == 0 && s.dy == 0) throw std::logic_error("slope DP traceback lost its path");
    moves.push_back(mv);
    if (s.matched) {
      r.matched_x += static_cast<std::size_t>(s.dx);
      r.matched_y += static_cast<std::size_t>(s.dy);
      if (mv == kDriftX || mv == kDriftY) ++r.drifts;
    }
    i -= s.dx;
    j -= s.dy;
  }
  std::reverse(moves.begin(), moves.end());
  if (r.feasible) r.matching = build_matching(moves, L, step, m_size, eps);
  return r;
}

SlopeDpResult slope_constrained_matching(const System& system, const OrbitSample& ox, const OrbitSample& oy,
                                         double delta, double eps) {
  if (ox.step != oy.step) throw UsageError(fmt::format("orbit steps differ ({} vs {})", ox.step, oy.step));
  const auto compat = compat_matrix(system, ox, oy, delta);
  const std::size_t m = std::min(ox.size(), oy.size());
  SlopeDpResult r = slope_dp(compat, m, ox.step, eps, true);
  if (r.matching) r.matching->delta = delta;
  return r;
}

FtildeResult ftilde_from_compat(const BitMatrix& compat, std::size_t m, double step, double tol,
                                std::optional<std::size_t> chain, bool want_certificate) {
  if (m == 0) throw UsageError("ftilde needs at least one sample");
  if (!(tol > 0.0)) throw UsageError(fmt::format("tolerance must be positive, got {}", tol));
  FtildeResult r;
  if (!chain) {
    const std::size_t k = m;
    chain = prefix_matching_sizes(compat, std::span<const std::size_t>(&k, 1))[0];
  }
  const double md = static_cast<double>(m);
  r.diagonal_bound = 1.0 - static_cast<double>(*chain) / md;
  double lo = 0.0;
  double hi = r.diagonal_bound;
  bool hi_certified = false;
  if (*chain == 0) {
    if (!slope_dp(compat, m, step, kEpsilonCeiling, false).feasible) {
      r.value = 1.0;
      r.empty = true;
      return r;
    }
    hi = kEpsilonCeiling;
    hi_certified = true;
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    ++r.iterations;
    if (slope_dp(compat, m, step, mid, false).feasible) {
      hi = mid;
      hi_certified = true;
    } else {
      lo = mid;
    }
  }
  r.value = hi;
  if (want_certificate) {
    // The diagonal bound is an infimum; any larger epsilon is feasible.
    const double eps = hi_certified ? hi : std::min(kEpsilonCeiling, hi + 0.5 * tol);
    if (eps > 0.0) r.certificate = slope_dp(compat, m, step, eps, true).matching;
  }
  return r;
}

namespace {

std::size_t grid_count(double t, double step) {
  if (!(step > 0.0 && step <= 0.1)) throw UsageError(fmt::format("grid step must lie in (0, 0.1], got {}", step));
  if (!(t > 1.0)) throw UsageError(fmt::format("horizon t must exceed 1, got {}", t));
  return static_cast<std::size_t>(std::floor(t / step + 1e-9));
}

}  // namespace

FtildeResult ftilde_gap_detail(const System& system, const PhasePoint& x, const PhasePoint& y, double t,
                               double delta, double step, double tol, bool want_certificate) {
  if (!system.is_flow()) throw UsageError("ftilde is defined for flows");
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  const std::size_t m = grid_count(t, step);
  const double horizon = static_cast<double>(m) * step;
  const auto ox = sample_orbit(system, x, horizon, step);
  const auto oy = sample_orbit(system, y, horizon, step);
  const auto compat = compat_matrix(system, ox, oy, delta);
  FtildeResult r = ftilde_from_compat(compat, m, step, tol, std::nullopt, want_certificate);
  if (r.certificate) r.certificate->delta = delta;
  return r;
}

double ftilde_gap(const System& system, const PhasePoint& x, const PhasePoint& y, double t, double delta,
                  double step, double tol) {
  return ftilde_gap_detail(system, x, y, t, delta, step, tol, false).value;
}

namespace {

void check_flow_horizons(const std::vector<double>& horizons) {
  if (horizons.size() < 4) throw UsageError(fmt::format("need at least 4 horizons, got {}", horizons.size()));
  for (std::size_t k = 1; k < horizons.size(); ++k)
    if (!(horizons[k] > horizons[k - 1])) throw UsageError("horizons must be strictly increasing");
}

// Orbits at the largest horizon with optional cached distances.
class PairGeometry {
 public:
  PairGeometry(const System& system, const PhasePoint& x, const PhasePoint& y, double horizon, double step,
               bool cache)
      : system_(system) {
    ox_ = sample_orbit(system, x, horizon, step);
    oy_ = sample_orbit(system, y, horizon, step);
    const std::size_t n = ox_.size();
    if (cache && static_cast<double>(n) * static_cast<double>(n) <= static_cast<double>(1 << 24)) {
      dists_.resize(n * n);
      parallel_for(n, [&](std::size_t i) {
        system_.dist_row(ox_.points[i], oy_.points, std::span<double>(dists_.data() + i * n, n));
      });
    }
  }

  const OrbitSample& ox() const { return ox_; }

  BitMatrix compat(double delta) const {
    if (dists_.empty()) return compat_matrix(system_, ox_, oy_, delta);
    const std::size_t n = ox_.size();
    BitMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dists_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j)
        if (row[j] < delta) m.set(i, j);
    }
    return m;
  }

 private:
  const System& system_;
  OrbitSample ox_;
  OrbitSample oy_;
  std::vector<double> dists_;
};

GapEstimate ftilde_curve(const PairGeometry& g, double delta, const std::vector<double>& horizons, double step,
                         double tol) {
  const auto compat = g.compat(delta);
  std::vector<std::size_t> ms;
  for (double t : horizons) ms.push_back(std::min(grid_count(t, step), g.ox().size()));
  const auto chains = prefix_matching_sizes(compat, ms);
  std::vector<double> gaps(horizons.size());
  for (std::size_t k = 0; k < horizons.size(); ++k)
    gaps[k] = ftilde_from_compat(compat, ms[k], step, tol, chains[k], false).value;
  return make_gap_estimate(horizons, std::move(gaps));
}

}  // namespace

GapEstimate ftilde_limsup(const System& system, const PhasePoint& x, const PhasePoint& y, double delta,
                          const std::vector<double>& horizons, double step, double tol) {
  if (!system.is_flow()) throw UsageError("ftilde is defined for flows");
  check_flow_horizons(horizons);
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  const std::size_t m = grid_count(horizons.back(), step);
  grid_count(horizons.front(), step);
  const PairGeometry g(system, x, y, static_cast<double>(m) * step, step, false);
  return ftilde_curve(g, delta, horizons, step, tol);
}

RhoResult rho_fk_flow(const System& system, const PhasePoint& x, const PhasePoint& y,
                      const std::vector<double>& horizons, double tol, double step, double eps_tol) {
  if (!system.is_flow()) throw UsageError("rho_fk_flow is defined for flows");
  check_flow_horizons(horizons);
  if (!(tol > 0.0)) throw UsageError(fmt::format("tolerance must be positive, got {}", tol));
  const std::size_t m = grid_count(horizons.back(), step);
  grid_count(horizons.front(), step);
  const PairGeometry g(system, x, y, static_cast<double>(m) * step, step, true);
  auto holds = [&](double delta) { return ftilde_curve(g, delta, horizons, step, eps_tol).tail_sup < delta; };
  RhoResult r;
  r.hi = system.diameter();
  if (!holds(r.hi)) {
    r.bracketed = false;
    r.value = r.hi;
    return r;
  }
  while (r.hi - r.lo > tol) {
    const double mid = 0.5 * (r.lo + r.hi);
    ++r.iterations;
    if (holds(mid))
      r.hi = mid;
    else
      r.lo = mid;
  }
  r.value = 0.5 * (r.lo + r.hi);
  return r;
}

namespace {

PhasePoint point_at(const System& system, const OrbitSample& o, double s) {
  auto k = static_cast<std::size_t>(std::max(0.0, std::floor(s / o.step)));
  if (k >= o.size()) k = o.size() - 1;
  const double dt = s - static_cast<double>(k) * o.step;
  if (dt == 0.0) return o.points[k];
  return system.evolve(o.points[k], dt);
}

}  // namespace

CheckResult check_cont_matching(const System& system, const OrbitSample& ox, const OrbitSample& oy,
                                const ContMatching& h, const CheckOptions& options) {
  CheckResult r;
  auto fail = [&](std::string why) {
    if (r.ok) {
      r.ok = false;
      r.reason = std::move(why);
    }
  };
  const double eps = options.epsilon;
  const double t = h.t;
  const double fuzz = 1e-9 * std::max(1.0, t);
  r.min_slope = std::numeric_limits<double>::infinity();
  r.max_slope = -std::numeric_limits<double>::infinity();
  if (h.knots.empty() && !h.segments.empty()) fail("segments without knots");
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
      if (!(slope > 1.0 - eps && slope < 1.0 + eps))
        fail(fmt::format("slope {} on piece {} outside ({}, {})", slope, k, 1.0 - eps, 1.0 + eps));
      r.coverage += s1 - s0;
      r.coverage_y += u1 - u0;
      const double dx = ox.step / options.subsamples;
      const auto pieces = static_cast<std::size_t>(std::ceil((s1 - s0) / dx - 1e-9));
      for (std::size_t q = 0; q < std::max<std::size_t>(pieces, 1); ++q) {
        const double s_eval = s0 + (s1 - s0) * static_cast<double>(q) / static_cast<double>(std::max<std::size_t>(pieces, 1));
        const double u_eval = u0 + slope * (s_eval - s0);
        const double d = system.dist(point_at(system, ox, s_eval), point_at(system, oy, u_eval));
        r.max_dist = std::max(r.max_dist, d);
        if (!(d < options.threshold + options.slack))
          fail(fmt::format("d(phi^{} x, phi^{} y) = {} not below {} + {}", s_eval, u_eval, d, options.threshold,
                           options.slack));
      }
    }
  }
  if (std::fabs(r.coverage - h.coverage) > fuzz) fail(fmt::format("claimed coverage {} but segments cover {}", h.coverage, r.coverage));
  if (std::fabs(r.coverage_y - h.coverage_y) > fuzz)
    fail(fmt::format("claimed image coverage {} but segments cover {}", h.coverage_y, r.coverage_y));
  if (!(r.coverage > (1.0 - eps) * t)) fail(fmt::format("coverage {} not above (1 - {}) * {}", r.coverage, eps, t));
  if (!(r.coverage_y > (1.0 - eps) * t))
    fail(fmt::format("image coverage {} not above (1 - {}) * {}", r.coverage_y, eps, t));
  if (h.segments.empty()) r.min_slope = r.max_slope = 1.0;
  return r;
}

LiftResult lift_matching(const Matching& pi, std::size_t n, double delta, double eps) {
  const double np1 = static_cast<double>(n + 1);
  if (!(delta < eps / 2.0)) throw ConstructionError(fmt::format("delta < eps/2 fails: {} >= {}", delta, eps / 2.0));
  if (!(np1 * eps / 4.0 > 1.0)) throw ConstructionError(fmt::format("t eps/4 > 1 fails at t = {}, eps = {}", np1, eps));
  if (!(static_cast<double>(pi.size()) >= (1.0 - delta) * np1))
    throw ConstructionError(fmt::format("|pi| >= (1 - delta)(n + 1) fails: {} < {}", pi.size(), (1.0 - delta) * np1));
  for (std::size_t k = 0; k < pi.size(); ++k) {
    const auto [i, j] = pi.pairs[k];
    if (i > n || j > n) throw ConstructionError(fmt::format("pair ({}, {}) outside [0, {}]", i, j, n));
    if (k > 0 && (i <= pi.pairs[k - 1].first || j <= pi.pairs[k - 1].second))
      throw ConstructionError("matching is not order preserving");
  }
  LiftResult r;
  ContMatching& h = r.matching;
  h.t = np1;
  h.epsilon = eps;
  h.delta = eps;
  bool open = false;
  std::size_t prev_i = 0, prev_j = 0;
  for (const auto& [i, j] : pi.pairs) {
    if (i > n - 1 || j > n - 1 || n == 0) continue;
    ++r.d0;
    const bool extends = open && i == prev_i + 1 && j == prev_j + 1;
    if (!extends) {
      h.knots.emplace_back(static_cast<double>(i), static_cast<double>(j));
      h.segments.emplace_back(h.knots.size() - 1, h.knots.size() - 1);
      h.knots.emplace_back(static_cast<double>(i + 1), static_cast<double>(j + 1));
    } else {
      h.knots.back() = {static_cast<double>(i + 1), static_cast<double>(j + 1)};
    }
    h.segments.back().second = h.knots.size() - 1;
    open = true;
    prev_i = i;
    prev_j = j;
  }
  h.coverage = static_cast<double>(r.d0);
  h.coverage_y = static_cast<double>(r.d0);
  return r;
}

}  // namespace fk
