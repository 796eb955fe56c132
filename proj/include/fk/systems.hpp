#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fk/phase_point.hpp"
#include "fk/rng.hpp"
#include "fk/system_spec.hpp"

namespace fk {

// An evaluable dynamical system: a homeomorphism (map, integer time) or a
// continuous flow (real time), together with its metric. Immutable; every
// member function is safe to call concurrently.
class System {
 public:
  virtual ~System() = default;

  virtual bool is_flow() const = 0;
  virtual std::string describe() const = 0;

  // Maps reject non-integer t with UsageError.
  virtual PhasePoint evolve(const PhasePoint& p, double t) const = 0;
  virtual double dist(const PhasePoint& p, const PhasePoint& q) const = 0;
  // out[k] = dist(p, qs[k]); overridden where a tight loop pays off.
  virtual void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const;
  // Length of the orbit path from p to evolve(p, dt), measured in the metric
  // piece by piece (bounded by the one-step displacement of a sampled orbit).
  virtual double displacement(const PhasePoint& p, double dt) const;
  virtual double diameter() const = 0;

  virtual PhasePoint random_point(SplitMix64& rng) const = 0;
  // Throws UsageError when p is not a canonical point of this system.
  virtual void check_point(const PhasePoint& p) const = 0;
  // Coordinates used by box partitions: circle (x), torus (x, y), shift (value
  // of the window read as a base-arity fraction), fiber (base..., height/roof).
  virtual std::vector<double> coordinates(const PhasePoint& p) const = 0;
  // Textual point: circle "0.25", torus "0.1,0.2", shift word "0110" or
  // "seed:<n>", sturmian intercept "0.3"; fibers append "@<height>".
  virtual PhasePoint parse_point(std::string_view text) const = 0;
};

class MapSystem : public System {
 public:
  bool is_flow() const final { return false; }
  PhasePoint evolve(const PhasePoint& p, double t) const final;
  double dist(const PhasePoint& p, const PhasePoint& q) const final;
  void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const override;
  std::vector<double> coordinates(const PhasePoint& p) const final;
  void check_point(const PhasePoint& p) const final;
  PhasePoint random_point(SplitMix64& rng) const final;
  PhasePoint parse_point(std::string_view text) const final;

  virtual BasePoint step(const BasePoint& b, std::int64_t n) const = 0;
  virtual double base_dist(const BasePoint& a, const BasePoint& b) const = 0;
  // d(T a, T b) without materializing the images where possible.
  virtual double image_dist(const BasePoint& a, const BasePoint& b) const;
  // d(T a, b).
  virtual double cross_dist(const BasePoint& a, const BasePoint& b) const;
  // A coordinate in [0,1) on which roof and rate profiles are evaluated.
  virtual double base_coordinate(const BasePoint& b) const = 0;
  // base_coordinate(T b).
  virtual double image_coordinate(const BasePoint& b) const;
  virtual std::vector<double> base_coordinates(const BasePoint& b) const = 0;
  virtual void check_base(const BasePoint& b) const = 0;
  virtual BasePoint random_base(SplitMix64& rng) const = 0;
  virtual BasePoint parse_base(std::string_view text) const = 0;
};

// Flows whose phase space is a special-flow space over a base map: points are
// FiberPoints. Time changes share the phase space and metric of their flow.
class FiberFlow : public System {
 public:
  bool is_flow() const final { return true; }
  std::vector<double> coordinates(const PhasePoint& p) const final;
  void check_point(const PhasePoint& p) const final;
  PhasePoint parse_point(std::string_view text) const final;

  virtual const MapSystem& base() const = 0;
  virtual double roof(const BasePoint& b) const = 0;
  virtual double max_roof() const = 0;
};

std::shared_ptr<const System> make_system(const SystemSpec& spec);
std::shared_ptr<const System> make_system(std::string_view spec_text);

// Height snapping for special flows: heights within this (relative) distance
// of the roof wrap to the next fiber.
inline constexpr double kRoofSnap = 1e-9;
// Time-change integration: composite midpoint rule with this panel width and
// bisection on the upper limit to this tolerance.
inline constexpr double kTimeChangePanel = 1e-3;
inline constexpr double kTimeChangeTol = 1e-12;

struct OrbitSample {
  PhasePoint origin;
  double step = 1.0;
  std::vector<double> times;
  std::vector<PhasePoint> points;
  double horizon = 0.0;

  std::size_t size() const { return points.size(); }
};

// m = floor(horizon/step) samples at times k*step. Maps need step = 1.
// Map orbits are evaluated in closed form from the origin; flow orbits are
// stepped with evolve(points[k-1], step), so points[k] agrees with
// evolve(origin, times[k]) up to accumulated evolution tolerance.
OrbitSample sample_orbit(const System& system, const PhasePoint& p, double horizon, double step);

// Largest displacement(points[k], step) along the sample.
double max_step_displacement(const System& system, const OrbitSample& orbit);

}  // namespace fk
