#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fk/bit_matrix.hpp"
#include "fk/flow_matching.hpp"
#include "fk/measures.hpp"
#include "fk/systems.hpp"

namespace fk {

// Half-open coordinate box: lo[d] <= coordinates(p)[d] < hi[d] for the
// leading lo.size() coordinates.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(const std::vector<double>& c) const;
};

// A cell is a union of boxes, or an arbitrary membership predicate when
// `predicate` is set. `open` marks cells drawn from the countable basis
// (grid boxes, unions of metric balls).
struct Cell {
  std::string name;
  bool open = true;
  std::vector<Box> boxes;
  std::function<bool(const PhasePoint&)> predicate;
};

// Finite partition with cells labeled 0..size()-1. At most one cell may be
// the rest cell, which holds every point no other cell claims.
class Partition {
 public:
  Partition() = default;
  Partition(std::string name, std::shared_ptr<const System> system);

  std::size_t add_cell(Cell cell);
  std::size_t add_rest_cell(std::string name, bool open);

  const std::string& name() const { return name_; }
  const std::shared_ptr<const System>& system() const { return system_; }
  std::size_t size() const { return cells_.size(); }
  const Cell& cell(std::size_t i) const { return cells_[i]; }
  std::optional<std::size_t> rest() const { return rest_; }

  // Label of p; throws UsageError when no cell or more than one cell claims p.
  std::size_t label(const PhasePoint& p) const;
  std::vector<std::size_t> labels(const std::vector<PhasePoint>& points) const;

 private:
  std::string name_;
  std::shared_ptr<const System> system_;
  std::vector<Cell> cells_;
  std::optional<std::size_t> rest_;
  // Grid partitions label arithmetically: k bins per coordinate.
  int grid_k_ = 0;
  std::size_t grid_dims_ = 0;

  friend Partition grid_partition(std::shared_ptr<const System> system, int k);
};

// Circle: k arcs. Torus: k x k squares. Special-flow spaces: k bins of the
// first base coordinate (per base dimension) times k bins of height/roof.
// Base coordinates of shift spaces are the window values.
Partition grid_partition(std::shared_ptr<const System> system, int k);

// "grid:k=<k>" or "file:<path>"; file lines `cell <label> box <lo1> <hi1> [<lo2> <hi2>]`,
// repeated labels extend a cell, `#` starts a comment.
Partition parse_partition(std::shared_ptr<const System> system, std::string_view spec);
Partition parse_partition_text(std::shared_ptr<const System> system, std::string_view text, std::string name);

// Cell masses on a sample.
std::vector<double> cell_masses(const Partition& p, const std::vector<PhasePoint>& sample);

// All cells open except at most one, and that one has sample mass < eps.
bool essentially_open(const Partition& p, double eps, const std::vector<PhasePoint>& sample);

// Maximum-weight perfect assignment on a square integer matrix.
// Returns the column assigned to each row.
std::vector<std::size_t> max_assignment(const std::vector<std::vector<long>>& w);

// Overlap counts O[i][j] = #{sample points in P_i and Q_j}, padded square.
std::vector<std::vector<long>> overlap_matrix(const std::vector<std::size_t>& lp, std::size_t np,
                                              const std::vector<std::size_t>& lq, std::size_t nq);

// 1 - max_sigma sum_i O[i][sigma(i)] / N.
double d_mu_from_labels(const std::vector<std::size_t>& lp, std::size_t np, const std::vector<std::size_t>& lq,
                        std::size_t nq);
double d_mu(const Partition& p, const Partition& q, const EmpiricalMeasure& sample);

// Every cell P_i is replaced by the union of open balls B(s, r_s) around its
// sample points s, dropping the floor(eps |P_i| / (4n)) points of smallest
// isolation radius; r_s is half the distance from s to the nearest sample
// point of another cell, so the balls of different cells are disjoint. The
// remainder becomes the single non-open cell. Partitions whose cells are all
// open are returned unchanged. Refuses samples smaller than ceil(4n/eps).
Partition essentialize(const Partition& p, double eps, const EmpiricalMeasure& sample);

// Cell index of every orbit sample point.
struct LabelTrack {
  std::vector<std::size_t> labels;
  double step = 1.0;
  double horizon = 0.0;

  std::size_t size() const { return labels.size(); }
};

LabelTrack label_track(const Partition& p, const OrbitSample& orbit);

// M[i][j] = (labels agree), over the common length of the two tracks.
BitMatrix label_compat(const LabelTrack& x, const LabelTrack& y);

// f_t(x, y, P): the continuous-matching gap with label agreement in place of
// metric closeness.
FtildeResult ratner_gap_tracks(const LabelTrack& x, const LabelTrack& y, double tol, bool want_certificate = false);
double ratner_gap(const System& system, const PhasePoint& x, const PhasePoint& y, double t, const Partition& p,
                  double step = kDefaultGridStep, double tol = kDefaultBisectionTol);

// y in B_t(center, eps, P): decided by one DP run at eps (1 - kBallMargin),
// i.e. matchable at a level strictly below eps.
inline constexpr double kBallMargin = 1e-9;
bool ball_member_tracks(const LabelTrack& center, const LabelTrack& y, double eps);
bool ball_member(const System& system, const PhasePoint& y, const PhasePoint& center, double t, double eps,
                 const Partition& p, double step = kDefaultGridStep);

// Independent validation of a label matching: knot order, slopes strictly
// inside (1 - epsilon, 1 + epsilon), both coverages above (1 - epsilon) t,
// and for every x-sample s in A the label of x at s equals the label of y at
// the y-sample nearest to h(s) (ties round up).
CheckResult check_label_matching(const LabelTrack& x, const LabelTrack& y, const ContMatching& h, double epsilon);

// Greedy (t, eps, P)-cover of a point sample: repeatedly the point whose ball
// holds the most uncovered points, until the covered fraction exceeds
// mass_target. The count is an upper bound on K_t(eps, P).
struct CoverResult {
  std::size_t count = 0;
  std::vector<std::size_t> centers;
  double covered = 0.0;
  bool shortfall = false;
  std::size_t sample = 0;
};

CoverResult greedy_cover(const std::vector<std::vector<bool>>& member, double mass_target);
// member[c][y] = y in B_t(c, eps, P) for all sample pairs.
std::vector<std::vector<bool>> ball_matrix(const std::vector<LabelTrack>& tracks, double eps);
CoverResult covering_number(const System& system, const std::vector<PhasePoint>& sample, double t, double eps,
                            const Partition& p, double mass_target, double step = kDefaultGridStep);

// Positive non-decreasing normalizations u(t).
class UFunction {
 public:
  enum class Kind { Identity, Log, Sqrt };
  explicit UFunction(Kind kind = Kind::Identity) : kind_(kind) {}
  static UFunction parse(std::string_view name);

  double operator()(double t) const;
  std::string name() const;

 private:
  Kind kind_;
};

// log K_t / u(t) on a horizon grid, with the minimum over the last quartile
// standing in for the liminf.
struct BetaCurve {
  std::vector<double> horizons;
  std::vector<std::size_t> counts;
  std::vector<double> values;
  double tail_inf = 0.0;
};

BetaCurve beta_from_counts(const std::vector<double>& horizons, const std::vector<std::size_t>& counts,
                           const UFunction& u);
BetaCurve beta_estimate(const System& system, const std::vector<PhasePoint>& sample, double eps,
                        const Partition& p, const UFunction& u, const std::vector<double>& horizons,
                        double step = kDefaultGridStep);

// Finite-family surrogates: e(u, P) ~ max over the eps family of tail_inf,
// e(Phi, u) ~ max over the partition family of e(u, P).
struct ESurrogate {
  std::vector<double> eps_family;
  std::vector<std::string> partitions;
  std::vector<std::vector<double>> beta;  // [partition][eps]
  std::vector<double> e_u_p;
  double e_phi_u = 0.0;
};

ESurrogate e_surrogate(const std::vector<std::vector<double>>& beta_tail_inf, std::vector<double> eps_family,
                       std::vector<std::string> partitions);

// Restriction of a certified (t, eps, Q)-matching h to
//   A = A_0 ∩ C(x) ∩ h^{-1}(A_0' ∩ C(y)),
// C the set where the P and Q itineraries agree, evaluated per x-grid cell
// (the cell's sample and the y-sample its image is paired with). Pairs whose disagreement frequency along either
// orbit deviates from d_PQ by delta/2 or more lie outside the uniform set H
// and are reported with in_h = false. The certified eps' is the least level
// (>= eps) at which the restriction satisfies the coverage conditions, and
// bound = 4 eps + 2 d_PQ + delta.
struct TransferResult {
  ContMatching matching;
  double epsilon_prime = 1.0;
  double bound = 0.0;
  double slack = 0.0;
  double freq_x = 0.0;
  double freq_y = 0.0;
  bool in_h = false;
  bool feasible = false;
  bool within_bound = false;
};

// Rounding allowance on the certified eps'; the bound itself is exact on the grid.
inline constexpr double kTransferSlack = 1e-9;

TransferResult transfer_matching(const ContMatching& h, const LabelTrack& px, const LabelTrack& qx,
                                 const LabelTrack& py, const LabelTrack& qy, double d_pq, double delta);

nlohmann::json to_json(const CoverResult& r);
nlohmann::json to_json(const BetaCurve& b);

}  // namespace fk
