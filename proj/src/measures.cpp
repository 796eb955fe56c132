#include "fk/measures.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "fk/errors.hpp"
#include "fk/flow_matching.hpp"

namespace fk {

EmpiricalMeasure empirical(const OrbitSample& orbit) {
  if (orbit.size() == 0) throw UsageError("empirical measure of an empty orbit");
  EmpiricalMeasure mu;
  mu.atoms = orbit.points;
  mu.horizon = orbit.horizon;
  mu.step = orbit.step;
  return mu;
}

EmpiricalMeasure uniform_measure(std::vector<PhasePoint> atoms) {
  if (atoms.empty()) throw UsageError("uniform measure needs at least one atom");
  EmpiricalMeasure mu;
  mu.atoms = std::move(atoms);
  mu.horizon = static_cast<double>(mu.atoms.size());
  return mu;
}

nlohmann::json to_json(const FkMeasureReport& r) {
  return {{"epsilon_star", r.epsilon_star}, {"delta", r.delta},     {"prokhorov", r.prokhorov},
          {"bound", r.bound},               {"slack", r.slack},     {"displacement", r.displacement},
          {"samples", r.samples},           {"pass", r.pass}};
}

FkMeasureReport fk_measure_check(const System& system, const PhasePoint& x, const PhasePoint& y, double t,
                                 double delta, double step, double eps_tol) {
  if (!system.is_flow()) throw UsageError("fk_measure_check is defined for flows");
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  if (!(step > 0.0 && step <= 0.1)) throw UsageError(fmt::format("grid step must lie in (0, 0.1], got {}", step));
  if (!(t > 1.0)) throw UsageError(fmt::format("horizon t must exceed 1, got {}", t));
  const auto m = static_cast<std::size_t>(std::floor(t / step + 1e-9));
  if (m > kMaxAtoms)
    throw RefusalError(fmt::format("t/step = {} samples exceed the {}-atom limit of the Prokhorov solver", m, kMaxAtoms));
  const double horizon = static_cast<double>(m) * step;
  const auto ox = sample_orbit(system, x, horizon, step);
  const auto oy = sample_orbit(system, y, horizon, step);
  const DistanceMatrix dist = distance_matrix(system, ox.points, oy.points);

  BitMatrix compat(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (dist(i, j) < delta) compat.set(i, j);

  FkMeasureReport r;
  r.delta = delta;
  r.samples = m;
  r.epsilon_star = ftilde_from_compat(compat, m, step, eps_tol).value;
  r.prokhorov = prokhorov(dist).value;
  r.displacement = std::max(max_step_displacement(system, ox), max_step_displacement(system, oy));
  r.slack = r.displacement + 2.0 * eps_tol;
  r.bound = std::max(delta, 2.0 * r.epsilon_star);
  r.pass = r.prokhorov <= r.bound + r.slack;
  return r;
}

std::vector<double> generic_defect(const System& system, const PhasePoint& x, const std::vector<double>& horizons,
                                   const EmpiricalMeasure& reference, double step) {
  if (horizons.empty()) throw UsageError("generic_defect needs at least one horizon");
  for (std::size_t k = 1; k < horizons.size(); ++k)
    if (!(horizons[k] > horizons[k - 1])) throw UsageError("horizons must be strictly increasing");
  const auto orbit = sample_orbit(system, x, horizons.back(), step);
  std::vector<double> out;
  for (double t : horizons) {
    const auto m = std::min(orbit.size(), static_cast<std::size_t>(std::floor(t / step + 1e-9)));
    if (m == 0) throw UsageError(fmt::format("horizon {} shorter than one step", t));
    std::vector<PhasePoint> atoms(orbit.points.begin(), orbit.points.begin() + static_cast<std::ptrdiff_t>(m));
    out.push_back(prokhorov(distance_matrix(system, atoms, reference.atoms)).value);
  }
  return out;
}

}  // namespace fk
