#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fk/systems.hpp"

namespace fk {

// Uniform measure on finitely many atoms (an orbit sample, or any point set).
struct EmpiricalMeasure {
  std::vector<PhasePoint> atoms;
  double horizon = 0.0;
  double step = 1.0;

  std::size_t size() const { return atoms.size(); }
  double weight() const { return 1.0 / static_cast<double>(atoms.size()); }
};

EmpiricalMeasure empirical(const OrbitSample& orbit);
EmpiricalMeasure uniform_measure(std::vector<PhasePoint> atoms);

// Row-major distances between two atom lists.
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> d;

  double operator()(std::size_t i, std::size_t j) const { return d[i * cols + j]; }
};

DistanceMatrix distance_matrix(const System& system, const std::vector<PhasePoint>& a,
                               const std::vector<PhasePoint>& b);

inline constexpr std::size_t kMaxAtoms = 5000;
inline constexpr std::size_t kMaxUnits = 20000;

// Decision "some coupling puts mass >= 1 - eps on pairs at distance <= eps".
// Each mu atom is split into L/|mu| units and each nu atom into L/|nu| units,
// L = lcm(|mu|, |nu|); a maximum bipartite matching of units decides the
// question exactly. Feasible: `pairs` lists the (mu atom, nu atom) of every
// matched unit (mass 1/L each). Infeasible: `witness` is a set B of mu atoms
// with mu(B) > nu(B^eps) + eps, B^eps the closed eps-hull.
struct CouplingCertificate {
  bool feasible = false;
  double epsilon = 0.0;
  std::size_t units = 0;
  std::size_t matched = 0;
  std::size_t needed = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> witness;
  double witness_mass = 0.0;
  double witness_hull_mass = 0.0;
};

CouplingCertificate coupling_feasible(const DistanceMatrix& dist, double eps);
CouplingCertificate coupling_feasible(const System& system, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                      double eps);
// Re-validates a certificate against the distances: marginals, closeness and
// mass for a coupling, the violated inequality for a witness.
bool validate_certificate(const DistanceMatrix& dist, const CouplingCertificate& c);

struct ProkhorovResult {
  double value = 0.0;
  CouplingCertificate certificate;             // feasible at value
  std::optional<CouplingCertificate> witness;  // infeasible at the next smaller candidate
  std::size_t checks = 0;
};

// Least feasible eps among the candidates {pairwise distances} U {k/L}.
// Closeness is non-strict (d <= eps).
ProkhorovResult prokhorov(const DistanceMatrix& dist);
ProkhorovResult prokhorov(const System& system, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

// D_P(mu_{x,t}, mu_{y,t}) <= max(delta, 2 eps*) + eta with eps* = ftilde_gap
// and eta = largest one-step displacement along both orbits + 2 eps_tol.
struct FkMeasureReport {
  double epsilon_star = 0.0;
  double delta = 0.0;
  double prokhorov = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  double displacement = 0.0;
  std::size_t samples = 0;
  bool pass = false;
};

nlohmann::json to_json(const FkMeasureReport& r);

FkMeasureReport fk_measure_check(const System& system, const PhasePoint& x, const PhasePoint& y, double t,
                                 double delta, double step, double eps_tol);

// D_P(mu_{x,t}, reference) for each horizon t.
std::vector<double> generic_defect(const System& system, const PhasePoint& x, const std::vector<double>& horizons,
                                   const EmpiricalMeasure& reference, double step);

}  // namespace fk
