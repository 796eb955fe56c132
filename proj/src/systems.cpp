#include "fk/systems.hpp"

#include <fmt/format.h>

#include <cmath>

#include "fk/errors.hpp"
#include "system_kinds.hpp"

namespace fk {

void System::dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const {
  for (std::size_t k = 0; k < qs.size(); ++k) out[k] = dist(p, qs[k]);
}

double System::displacement(const PhasePoint& p, double dt) const { return dist(p, evolve(p, dt)); }

namespace {

void check_profile(const Profile& p, const char* field) {
  if (!std::isfinite(p.c) || !std::isfinite(p.a)) throw ConfigError(field, "profile parameters must be finite");
  if (p.a < 0.0) throw ConfigError(field, fmt::format("amplitude a = {} must be >= 0", p.a));
  if (!(p.c > p.a)) throw ConfigError(field, fmt::format("profile must be positive (need c > a, got c = {}, a = {})", p.c, p.a));
}

void check_window(int window) {
  if (window < 1 || window > 1024) throw ConfigError("window", fmt::format("window must lie in [1, 1024], got {}", window));
}

std::shared_ptr<const MapSystem> make_map(const SystemSpec& spec) {
  using K = SystemSpec::Kind;
  switch (spec.kind) {
    case K::Rotation:
      if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw ConfigError("alpha", fmt::format("rotation angle must lie in (0,1), got {}", spec.alpha));
      return detail::make_rotation(spec.alpha);
    case K::Torus:
      if (!std::isfinite(spec.alpha)) throw ConfigError("alpha1", "torus angle must be finite");
      if (!std::isfinite(spec.alpha2)) throw ConfigError("alpha2", "torus angle must be finite");
      return detail::make_torus(spec.alpha - std::floor(spec.alpha), spec.alpha2 - std::floor(spec.alpha2));
    case K::FullShift:
      if (spec.arity < 2 || spec.arity > 10)
        throw ConfigError("arity", fmt::format("arity must lie in [2, 10], got {}", spec.arity));
      check_window(spec.window);
      return detail::make_full_shift(spec.arity, spec.window);
    case K::Sturmian:
      if (!(spec.slope > 0.0 && spec.slope < 1.0))
        throw ConfigError("slope", fmt::format("sturmian slope must lie in (0,1), got {}", spec.slope));
      check_window(spec.window);
      return detail::make_sturmian(spec.slope, spec.window);
    default:
      throw ConfigError("base", fmt::format("'{}' is a flow, expected a map", spec.to_string()));
  }
}

std::shared_ptr<const System> build(const SystemSpec& spec) {
  using K = SystemSpec::Kind;
  switch (spec.kind) {
    case K::Suspension:
      if (!spec.inner) throw ConfigError("base", "missing base system");
      return detail::make_special_flow(make_map(*spec.inner), Profile::constant(1.0), true);
    case K::Special:
      if (!spec.inner) throw ConfigError("base", "missing base system");
      check_profile(spec.roof, "roof");
      return detail::make_special_flow(make_map(*spec.inner), spec.roof, false);
    case K::TimeChange: {
      if (!spec.inner) throw ConfigError("flow", "missing flow");
      check_profile(spec.rate, "rate");
      if (!spec.inner->is_flow())
        throw ConfigError("flow", fmt::format("'{}' is a map, expected a flow", spec.inner->to_string()));
      auto inner = std::dynamic_pointer_cast<const FiberFlow>(build(*spec.inner));
      return detail::make_time_change(std::move(inner), spec.rate);
    }
    default:
      return make_map(spec);
  }
}

}  // namespace

std::shared_ptr<const System> make_system(const SystemSpec& spec) { return build(spec); }

std::shared_ptr<const System> make_system(std::string_view spec_text) {
  return make_system(parse_system_spec(spec_text));
}

OrbitSample sample_orbit(const System& system, const PhasePoint& p, double horizon, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw UsageError(fmt::format("orbit step must be positive, got {}", step));
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw UsageError(fmt::format("orbit horizon must be positive, got {}", horizon));
  if (!system.is_flow() && step != 1.0) throw UsageError(fmt::format("map orbits use step 1, got {}", step));
  const auto m = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  if (m == 0) throw UsageError(fmt::format("horizon {} shorter than one step {}", horizon, step));

  OrbitSample o;
  o.origin = p;
  o.step = step;
  o.horizon = static_cast<double>(m) * step;
  o.times.resize(m);
  o.points.reserve(m);
  for (std::size_t k = 0; k < m; ++k) o.times[k] = static_cast<double>(k) * step;
  if (system.is_flow()) {
    o.points.push_back(p);
    for (std::size_t k = 1; k < m; ++k) o.points.push_back(system.evolve(o.points.back(), step));
  } else {
    const auto& map = static_cast<const MapSystem&>(system);
    BasePoint b = to_base(p);
    o.points.push_back(p);
    for (std::size_t k = 1; k < m; ++k) {
      // Rotations are evaluated in closed form from the origin so rounding never accumulates.
      if (std::holds_alternative<SymbolPoint>(b))
        b = map.step(b, 1);
      else
        b = map.step(to_base(p), static_cast<std::int64_t>(k));
      o.points.push_back(to_phase(b));
    }
  }
  return o;
}

double max_step_displacement(const System& system, const OrbitSample& orbit) {
  double m = 0.0;
  for (const auto& q : orbit.points) m = std::max(m, system.displacement(q, orbit.step));
  return m;
}

}  // namespace fk
