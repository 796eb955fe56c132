#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

#include "fk/errors.hpp"
#include "fk/systems.hpp"
#include "system_kinds.hpp"

namespace fk {

namespace {

const FiberPoint& fiber(const PhasePoint& p) {
  if (auto f = std::get_if<FiberPoint>(&p)) return *f;
  throw UsageError("flow expects a fiber point (base@height)");
}

class SpecialFlow final : public FiberFlow {
 public:
  SpecialFlow(std::shared_ptr<const MapSystem> base, Profile roof, bool suspension)
      : base_(std::move(base)), roof_(roof), suspension_(suspension) {}

  std::string describe() const override {
    const SystemSpec inner = parse_system_spec(base_->describe());
    return suspension_ ? SystemSpec::suspension(inner).to_string() : SystemSpec::special(inner, roof_).to_string();
  }

  const MapSystem& base() const override { return *base_; }
  double roof(const BasePoint& b) const override {
    if (roof_.is_constant()) return roof_.c;
    return roof_(base_->base_coordinate(b));
  }
  double max_roof() const override { return roof_.max(); }
  double min_roof() const { return roof_.min(); }

  PhasePoint evolve(const PhasePoint& p, double t) const override {
    const FiberPoint& f = fiber(p);
    BasePoint b = f.base;
    double h = f.height + t;
    if (roof_.is_constant()) {
      const double r = roof_.c;
      const auto n = static_cast<std::int64_t>(std::floor(h / r + kRoofSnap));
      h -= static_cast<double>(n) * r;
      if (h < 0.0) h = 0.0;
      if (n != 0) b = base_->step(b, n);
      return FiberPoint{std::move(b), h};
    }
    while (h < 0.0) {
      b = base_->step(b, -1);
      h += roof(b);
    }
    for (double r = roof(b); h >= r * (1.0 - kRoofSnap); r = roof(b)) {
      h -= r;
      b = base_->step(b, 1);
    }
    if (h < 0.0) h = 0.0;
    return FiberPoint{std::move(b), h};
  }

  // Normalized heights tau = h/roof. Same-level term
  //   |tau_p - tau_q| + (1 - tau) d(b_p, b_q) + tau d(T b_p, T b_q),  tau = min(tau_p, tau_q),
  // which is the slice formula when the heights agree; pairs on either side of
  // a roof crossing are compared through the roof: (1 - tau_p) + tau_q + d(T b_p, b_q).
  double dist(const PhasePoint& p, const PhasePoint& q) const override {
    const FiberPoint& a = fiber(p);
    const FiberPoint& b = fiber(q);
    return fiber_dist(a, tau(a), b, tau(b));
  }

  void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const override {
    const FiberPoint& a = fiber(p);
    const double ta = tau(a);
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const FiberPoint& b = fiber(qs[k]);
      out[k] = fiber_dist(a, ta, b, tau(b));
    }
  }

  // Normalized height traversed.
  double displacement(const PhasePoint& p, double dt) const override {
    if (dt < 0.0) return displacement(evolve(p, dt), -dt);
    const FiberPoint& f = fiber(p);
    BasePoint b = f.base;
    double h = f.height;
    double total = 0.0;
    double remaining = dt;
    for (double r = roof(b); h + remaining >= r; r = roof(b)) {
      total += (r - h) / r;
      remaining -= r - h;
      h = 0.0;
      b = base_->step(b, 1);
    }
    return total + remaining / roof(b);
  }

  double diameter() const override { return 1.0 + base_->diameter(); }

  PhasePoint random_point(SplitMix64& rng) const override {
    BasePoint b = base_->random_base(rng);
    const double h = rng.uniform() * roof(b);
    return FiberPoint{std::move(b), h};
  }

  // Time from p up to the next roof crossing.
  double time_to_roof(const FiberPoint& f) const { return roof(f.base) - f.height; }

 private:
  double tau(const FiberPoint& f) const { return f.height / roof(f.base); }

  double fiber_dist(const FiberPoint& a, double ta, const FiberPoint& b, double tb) const {
    const double lo = std::min(ta, tb);
    double d = std::fabs(ta - tb) + (1.0 - lo) * base_->base_dist(a.base, b.base);
    if (lo > 0.0) d += lo * base_->image_dist(a.base, b.base);
    if ((1.0 - ta) + tb < d) d = std::min(d, (1.0 - ta) + tb + base_->cross_dist(a.base, b.base));
    if ((1.0 - tb) + ta < d) d = std::min(d, (1.0 - tb) + ta + base_->cross_dist(b.base, a.base));
    return d;
  }

  std::shared_ptr<const MapSystem> base_;
  Profile roof_;
  bool suspension_;
};

// Reparametrized flow psi^t(x) = phi^{v(t,x)}(x) with
//   integral_0^v rate(phi^s x) ds = t,
// rate read on the phase space as (1 - tau) f(b) + tau f(T b), continuous
// across roof crossings.
class TimeChange final : public FiberFlow {
 public:
  TimeChange(std::shared_ptr<const FiberFlow> flow, Profile rate)
      : flow_(std::move(flow)), rate_(rate), special_(dynamic_cast<const SpecialFlow*>(flow_.get())) {}

  std::string describe() const override {
    return SystemSpec::time_change(parse_system_spec(flow_->describe()), rate_).to_string();
  }

  const MapSystem& base() const override { return flow_->base(); }
  double roof(const BasePoint& b) const override { return flow_->roof(b); }
  double max_roof() const override { return flow_->max_roof(); }

  PhasePoint evolve(const PhasePoint& p, double t) const override {
    if (t == 0.0) return p;
    return flow_->evolve(p, inner_time(p, t));
  }

  double dist(const PhasePoint& p, const PhasePoint& q) const override { return flow_->dist(p, q); }
  void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const override {
    flow_->dist_row(p, qs, out);
  }
  double displacement(const PhasePoint& p, double dt) const override {
    if (dt == 0.0) return 0.0;
    return flow_->displacement(p, inner_time(p, dt));
  }
  double diameter() const override { return flow_->diameter(); }
  PhasePoint random_point(SplitMix64& rng) const override { return flow_->random_point(rng); }

  double rate_at(const FiberPoint& f) const {
    if (rate_.is_constant()) return rate_.c;
    const MapSystem& m = base();
    const double r = roof(f.base);
    const double tau = f.height / r;
    return (1.0 - tau) * rate_(m.base_coordinate(f.base)) + tau * rate_(m.image_coordinate(f.base));
  }

  // v(t, p): time of the underlying flow that corresponds to time t here.
  double inner_time(const PhasePoint& p, double t) const {
    if (rate_.is_constant()) return t / rate_.c;
    const double sign = t < 0.0 ? -1.0 : 1.0;
    const double target = std::fabs(t);
    double lo = target / rate_.max();
    double hi = target / rate_.min();
    const Integral integral(*this, p, sign, hi);
    while (hi - lo > kTimeChangeTol) {
      const double mid = 0.5 * (lo + hi);
      if (integral(mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    return sign * 0.5 * (lo + hi);
  }

 private:
  // Cumulative composite midpoint rule along the orbit of p in direction sign.
  // Panels are split at roof crossings of an underlying special flow, where
  // the integrand is linear in time, so the rule is exact there.
  class Integral {
   public:
    Integral(const TimeChange& tc, const PhasePoint& p, double sign, double v_max)
        : tc_(tc), p_(p), sign_(sign) {
      std::vector<double> breaks{0.0};
      if (tc.special_) {
        const FiberPoint& f = fiber(p);
        BasePoint b = f.base;
        double s = sign > 0.0 ? tc.special_->time_to_roof(f) : f.height;
        while (s < v_max) {
          if (s > 0.0) breaks.push_back(s);
          if (sign > 0.0) {
            b = tc.base().step(b, 1);
            s += tc.special_->roof(b);
          } else {
            b = tc.base().step(b, -1);
            s += tc.special_->roof(b);
          }
        }
      }
      breaks.push_back(v_max);
      starts_.push_back(0.0);
      cum_.push_back(0.0);
      for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double len = breaks[k + 1] - breaks[k];
        if (len <= 0.0) continue;
        const auto panels = static_cast<std::size_t>(std::ceil(len / kTimeChangePanel));
        const double w = len / static_cast<double>(panels);
        for (std::size_t i = 0; i < panels; ++i) {
          const double a = breaks[k] + w * static_cast<double>(i);
          const double b = i + 1 == panels ? breaks[k + 1] : a + w;
          cum_.push_back(cum_.back() + (b - a) * rate(0.5 * (a + b)));
          starts_.push_back(b);
        }
      }
    }

    double operator()(double v) const {
      auto it = std::upper_bound(starts_.begin(), starts_.end(), v);
      std::size_t k = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
      if (k + 1 >= starts_.size()) k = starts_.size() - 1;
      const double a = starts_[k];
      if (v <= a) return cum_[k];
      return cum_[k] + (v - a) * rate(0.5 * (a + v));
    }

   private:
    double rate(double s) const { return tc_.rate_at(fiber(tc_.flow_->evolve(p_, sign_ * s))); }

    const TimeChange& tc_;
    const PhasePoint& p_;
    double sign_;
    std::vector<double> starts_;
    std::vector<double> cum_;
  };

  std::shared_ptr<const FiberFlow> flow_;
  Profile rate_;
  const SpecialFlow* special_;
};

}  // namespace

std::vector<double> FiberFlow::coordinates(const PhasePoint& p) const {
  const FiberPoint& f = fiber(p);
  std::vector<double> c = base().base_coordinates(f.base);
  c.push_back(f.height / roof(f.base));
  return c;
}

void FiberFlow::check_point(const PhasePoint& p) const {
  const FiberPoint& f = fiber(p);
  base().check_base(f.base);
  const double r = roof(f.base);
  if (!(f.height >= 0.0 && f.height < r))
    throw UsageError(fmt::format("height {} outside [0, {}) for {}", f.height, r, describe()));
}

PhasePoint FiberFlow::parse_point(std::string_view text) const {
  const auto at = text.find('@');
  BasePoint b = base().parse_base(text.substr(0, at));
  if (at == std::string_view::npos) return FiberPoint{std::move(b), 0.0};
  const auto h_text = text.substr(at + 1);
  double h = 0.0;
  auto [ptr, ec] = std::from_chars(h_text.data(), h_text.data() + h_text.size(), h);
  if (ec != std::errc() || ptr != h_text.data() + h_text.size())
    throw UsageError(fmt::format("cannot parse height '{}'", h_text));
  const double r = roof(b);
  if (!(h >= 0.0 && h < r)) throw UsageError(fmt::format("height {} outside [0, {})", h, r));
  return FiberPoint{std::move(b), h};
}

namespace detail {

std::shared_ptr<const FiberFlow> make_special_flow(std::shared_ptr<const MapSystem> base, Profile roof,
                                                   bool suspension) {
  return std::make_shared<SpecialFlow>(std::move(base), roof, suspension);
}

std::shared_ptr<const FiberFlow> make_time_change(std::shared_ptr<const FiberFlow> flow, Profile rate) {
  return std::make_shared<TimeChange>(std::move(flow), rate);
}

}  // namespace detail

}  // namespace fk
