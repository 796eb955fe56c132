#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fk/bit_matrix.hpp"
#include "fk/matching.hpp"
#include "fk/systems.hpp"

namespace fk {

// Piecewise-linear monotone time change h: A -> A'. Knots are grouped in
// matched segments [first, last] (inclusive knot indices); within a segment
// knots increase strictly in both coordinates, across segments they are
// nondecreasing. A is the union of the segment spans [s_first, s_last).
struct ContMatching {
  std::vector<std::pair<double, double>> knots;
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  double t = 0.0;
  double coverage = 0.0;    // lambda(A)
  double coverage_y = 0.0;  // lambda(A')
  double epsilon = 1.0;     // slope window and coverage parameter
  double delta = 0.0;       // closeness threshold at the sample points

  bool operator==(const ContMatching&) const = default;
};

nlohmann::json to_json(const ContMatching& h);
ContMatching cont_matching_from_json(const nlohmann::json& j);

// Dynamic program over knots (i, j) in [0, m]^2 of the sampling grid. Moves:
// diagonal (1,1); drifts (L, L+1) and (L+1, L) with L = floor(1/eps) + 1, the
// shortest grid segments whose slope lies strictly inside (1 - eps, 1 + eps);
// unmatched skips (1,0), (0,1). A matched move needs every x-sample on its
// segment compatible with the y-sample nearest to its image, and every
// y-sample compatible with the x-sample nearest to its preimage (ties round
// up); the rule is symmetric under transposition. The DP minimizes
//   unmatched_x + unmatched_y + drifts
// and declares feasibility when that is < 2 eps m, which certifies both
// unmatched_x < eps m and unmatched_y < eps m. The criterion is monotone in
// the compatibility matrix.
struct SlopeDpResult {
  bool feasible = false;
  long cost = 0;
  std::size_t matched_x = 0;
  std::size_t matched_y = 0;
  std::size_t drifts = 0;
  std::optional<ContMatching> matching;  // when requested and feasible
};

SlopeDpResult slope_dp(const BitMatrix& compat, std::size_t m, double step, double eps, bool want_path);

// Samples both orbits with the given step over [0, t] and runs the DP at
// (delta, eps); a feasible result carries its certificate.
SlopeDpResult slope_constrained_matching(const System& system, const OrbitSample& ox, const OrbitSample& oy,
                                         double delta, double eps);

inline constexpr double kDefaultGridStep = 0.05;
inline constexpr double kDefaultBisectionTol = 1.0 / 128.0;
// Probe used to decide the empty matchable set.
inline constexpr double kEpsilonCeiling = 1.0 - 1e-6;

struct FtildeResult {
  double value = 1.0;
  // 1 - (longest diagonal chain)/m: an upper bound obtained without drifts.
  double diagonal_bound = 1.0;
  bool empty = false;  // infeasible even at kEpsilonCeiling
  int iterations = 0;
  std::optional<ContMatching> certificate;
};

// Bisection over eps on [0, diagonal_bound] to width tol; returns the upper
// end, which is either certified feasible or the diagonal bound itself.
FtildeResult ftilde_from_compat(const BitMatrix& compat, std::size_t m, double step, double tol,
                                std::optional<std::size_t> chain = std::nullopt, bool want_certificate = false);

double ftilde_gap(const System& system, const PhasePoint& x, const PhasePoint& y, double t, double delta,
                  double step = kDefaultGridStep, double tol = kDefaultBisectionTol);
FtildeResult ftilde_gap_detail(const System& system, const PhasePoint& x, const PhasePoint& y, double t,
                               double delta, double step, double tol, bool want_certificate);

GapEstimate ftilde_limsup(const System& system, const PhasePoint& x, const PhasePoint& y, double delta,
                          const std::vector<double>& horizons, double step = kDefaultGridStep,
                          double tol = kDefaultBisectionTol);

// Bisection on delta in (0, diameter] for tail_sup(ftilde_limsup) < delta.
RhoResult rho_fk_flow(const System& system, const PhasePoint& x, const PhasePoint& y,
                      const std::vector<double>& horizons, double tol, double step = kDefaultGridStep,
                      double eps_tol = kDefaultBisectionTol);

// Independent validation of a ContMatching against the orbits it refers to:
// knot ordering, A, A' within [0, t], segment slopes strictly inside
// (1 - epsilon, 1 + epsilon), recomputed coverages strictly above
// (1 - epsilon) t, and d(phi^s x, phi^h(s) y) < threshold + slack at
// `subsamples` points per grid step, with phi^s evaluated from the nearest
// earlier sample point.
struct CheckOptions {
  double epsilon = 1.0;
  double threshold = 0.0;
  double slack = 0.0;
  int subsamples = 2;
};

struct CheckResult {
  bool ok = true;
  std::string reason;
  double coverage = 0.0;
  double coverage_y = 0.0;
  double min_slope = 0.0;
  double max_slope = 0.0;
  double max_dist = 0.0;
};

CheckResult check_cont_matching(const System& system, const OrbitSample& ox, const OrbitSample& oy,
                                const ContMatching& h, const CheckOptions& options);

// Lift of an (n+1, delta)-matching of the time-1 map to a continuous
// matching on [0, n+1]: h translates [k, k+1) onto [pi(k), pi(k)+1) for k in
// D_0 = {k in D : k <= n-1, pi(k) <= n-1}. Preconditions |pi| >= (1-delta)(n+1),
// delta < eps/2 and (n+1) eps/4 > 1 throw ConstructionError when violated.
struct LiftResult {
  ContMatching matching;
  std::size_t d0 = 0;
};

LiftResult lift_matching(const Matching& pi, std::size_t n, double delta, double eps);

}  // namespace fk
