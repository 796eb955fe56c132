#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "fk/errors.hpp"
#include "fk/systems.hpp"
#include "system_kinds.hpp"

namespace fk {

namespace {

double arc(double a, double b) {
  const double d = std::fabs(a - b);
  return std::min(d, 1.0 - d);
}

double parse_real(std::string_view text, const char* what) {
  const char* first = text.data();
  const char* last = first + text.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw UsageError(fmt::format("cannot parse {} '{}'", what, text));
  return v;
}

template <class P>
const P& as(const BasePoint& b, const char* system) {
  if (auto p = std::get_if<P>(&b)) return *p;
  throw UsageError(fmt::format("point does not belong to {}", system));
}

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x < 1.0)) throw UsageError(fmt::format("{} coordinate {} outside [0,1)", what, x));
}

std::int64_t shift_amount(double nd) {
  return static_cast<std::int64_t>(nd);
}

class Rotation final : public MapSystem {
 public:
  explicit Rotation(double alpha) : alpha_(alpha) {}

  std::string describe() const override { return SystemSpec::rotation(alpha_).to_string(); }
  double diameter() const override { return 0.5; }

  BasePoint step(const BasePoint& b, std::int64_t n) const override {
    const double x = as<CirclePoint>(b, "rotation").x;
    const double shift = std::fmod(static_cast<double>(n) * alpha_, 1.0);
    return CirclePoint{reduce_unit(x + shift)};
  }
  double base_dist(const BasePoint& a, const BasePoint& b) const override {
    return arc(as<CirclePoint>(a, "rotation").x, as<CirclePoint>(b, "rotation").x);
  }
  double image_dist(const BasePoint& a, const BasePoint& b) const override { return base_dist(a, b); }
  double cross_dist(const BasePoint& a, const BasePoint& b) const override {
    return arc(reduce_unit(as<CirclePoint>(a, "rotation").x + alpha_), as<CirclePoint>(b, "rotation").x);
  }
  void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const override {
    const double x = as<CirclePoint>(to_base(p), "rotation").x;
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const auto* q = std::get_if<CirclePoint>(&qs[k]);
      if (!q) throw UsageError("point does not belong to rotation");
      out[k] = arc(x, q->x);
    }
  }
  double base_coordinate(const BasePoint& b) const override { return as<CirclePoint>(b, "rotation").x; }
  double image_coordinate(const BasePoint& b) const override {
    return reduce_unit(as<CirclePoint>(b, "rotation").x + alpha_);
  }
  std::vector<double> base_coordinates(const BasePoint& b) const override { return {base_coordinate(b)}; }
  void check_base(const BasePoint& b) const override { check_unit(as<CirclePoint>(b, "rotation").x, "circle"); }
  BasePoint random_base(SplitMix64& rng) const override { return CirclePoint{rng.uniform()}; }
  BasePoint parse_base(std::string_view text) const override {
    return CirclePoint{reduce_unit(parse_real(text, "circle point"))};
  }

 private:
  double alpha_;
};

class Torus final : public MapSystem {
 public:
  Torus(double a1, double a2) : a1_(a1), a2_(a2) {}

  std::string describe() const override { return SystemSpec::torus(a1_, a2_).to_string(); }
  double diameter() const override { return 0.5; }

  BasePoint step(const BasePoint& b, std::int64_t n) const override {
    const auto& p = as<TorusPoint>(b, "torus");
    const double nd = static_cast<double>(n);
    return TorusPoint{reduce_unit(p.x + std::fmod(nd * a1_, 1.0)), reduce_unit(p.y + std::fmod(nd * a2_, 1.0))};
  }
  // Sup of the two arc-length distances.
  double base_dist(const BasePoint& a, const BasePoint& b) const override {
    const auto& p = as<TorusPoint>(a, "torus");
    const auto& q = as<TorusPoint>(b, "torus");
    return std::max(arc(p.x, q.x), arc(p.y, q.y));
  }
  double image_dist(const BasePoint& a, const BasePoint& b) const override { return base_dist(a, b); }
  double cross_dist(const BasePoint& a, const BasePoint& b) const override { return base_dist(step(a, 1), b); }
  double base_coordinate(const BasePoint& b) const override { return as<TorusPoint>(b, "torus").x; }
  double image_coordinate(const BasePoint& b) const override {
    return reduce_unit(as<TorusPoint>(b, "torus").x + a1_);
  }
  std::vector<double> base_coordinates(const BasePoint& b) const override {
    const auto& p = as<TorusPoint>(b, "torus");
    return {p.x, p.y};
  }
  void check_base(const BasePoint& b) const override {
    const auto& p = as<TorusPoint>(b, "torus");
    check_unit(p.x, "torus");
    check_unit(p.y, "torus");
  }
  BasePoint random_base(SplitMix64& rng) const override {
    const double x = rng.uniform();
    return TorusPoint{x, rng.uniform()};
  }
  BasePoint parse_base(std::string_view text) const override {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) throw UsageError(fmt::format("torus point '{}' needs two coordinates", text));
    return TorusPoint{reduce_unit(parse_real(text.substr(0, comma), "torus point")),
                      reduce_unit(parse_real(text.substr(comma + 1), "torus point"))};
  }

 private:
  double a1_;
  double a2_;
};

// Shared machinery of the two symbolic systems.
class SymbolSystem : public MapSystem {
 public:
  SymbolSystem(int arity, int window) : arity_(arity), window_(window), weights_(static_cast<std::size_t>(window)) {
    double w = 0.5;
    for (auto& x : weights_) {
      x = w;
      w *= 0.5;
    }
  }

  double diameter() const override { return 1.0 - std::ldexp(1.0, -window_); }

  BasePoint step(const BasePoint& b, std::int64_t n) const override {
    const auto& p = as<SymbolPoint>(b, name());
    if (n == 1) {
      SymbolPoint q;
      q.source = p.source;
      q.offset = p.offset + 1;
      q.symbols.assign(p.symbols.begin() + 1, p.symbols.end());
      q.symbols.push_back(p.source->at(q.offset + window_));
      return q;
    }
    return make_symbol_point(p.source, p.offset + n, window_);
  }
  double base_dist(const BasePoint& a, const BasePoint& b) const override {
    return window_dist(as<SymbolPoint>(a, name()).symbols.data(), as<SymbolPoint>(b, name()).symbols.data());
  }
  double image_dist(const BasePoint& a, const BasePoint& b) const override {
    return window_dist(as<SymbolPoint>(a, name()).symbols.data() + 1, as<SymbolPoint>(b, name()).symbols.data() + 1);
  }
  double cross_dist(const BasePoint& a, const BasePoint& b) const override {
    return window_dist(as<SymbolPoint>(a, name()).symbols.data() + 1, as<SymbolPoint>(b, name()).symbols.data());
  }
  void dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const override {
    const auto* s = std::get_if<SymbolPoint>(&p);
    if (!s) throw UsageError(fmt::format("point does not belong to {}", name()));
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const auto* q = std::get_if<SymbolPoint>(&qs[k]);
      if (!q) throw UsageError(fmt::format("point does not belong to {}", name()));
      out[k] = window_dist(s->symbols.data(), q->symbols.data());
    }
  }
  // The window read as a base-arity fraction 0.s0 s1 s2 ...
  double base_coordinate(const BasePoint& b) const override {
    return value(as<SymbolPoint>(b, name()).symbols.data());
  }
  double image_coordinate(const BasePoint& b) const override {
    return value(as<SymbolPoint>(b, name()).symbols.data() + 1);
  }
  std::vector<double> base_coordinates(const BasePoint& b) const override { return {base_coordinate(b)}; }
  void check_base(const BasePoint& b) const override {
    const auto& p = as<SymbolPoint>(b, name());
    if (p.symbols.size() != static_cast<std::size_t>(window_) + 1)
      throw UsageError(fmt::format("symbol window has length {}, expected {}", p.symbols.size() - 1, window_));
    for (auto c : p.symbols)
      if (c >= arity_) throw UsageError(fmt::format("symbol {} outside alphabet of arity {}", int(c), arity_));
  }

 protected:
  virtual const char* name() const = 0;

  int arity_;
  int window_;

 private:
  double window_dist(const std::uint8_t* a, const std::uint8_t* b) const {
    double d = 0.0;
    for (int i = 0; i < window_; ++i)
      if (a[i] != b[i]) d += weights_[static_cast<std::size_t>(i)];
    return d;
  }
  double value(const std::uint8_t* s) const {
    double v = 0.0;
    const double inv = 1.0 / arity_;
    for (int i = std::min(window_, 52) - 1; i >= 0; --i) v = (v + s[i]) * inv;
    return v;
  }

  std::vector<double> weights_;
};

class FullShift final : public SymbolSystem {
 public:
  using SymbolSystem::SymbolSystem;

  std::string describe() const override { return SystemSpec::full_shift(arity_, window_).to_string(); }
  BasePoint random_base(SplitMix64& rng) const override {
    return make_symbol_point(hashed_sequence(rng.next(), arity_), 0, window_);
  }
  // "seed:<n>" or a word repeated periodically.
  BasePoint parse_base(std::string_view text) const override {
    if (text.starts_with("seed:")) {
      const auto digits = text.substr(5);
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), seed);
      if (ec != std::errc() || ptr != digits.data() + digits.size())
        throw UsageError(fmt::format("cannot parse shift seed '{}'", text));
      return make_symbol_point(hashed_sequence(seed, arity_), 0, window_);
    }
    std::vector<std::uint8_t> word;
    for (char c : text) {
      if (c < '0' || c > '9') throw UsageError(fmt::format("cannot parse shift word '{}'", text));
      word.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return make_symbol_point(periodic_word(std::move(word), arity_), 0, window_);
  }

 protected:
  const char* name() const override { return "shift"; }
};

class Sturmian final : public SymbolSystem {
 public:
  Sturmian(double slope, int window) : SymbolSystem(2, window), slope_(slope) {}

  std::string describe() const override { return SystemSpec::sturmian(slope_, window_).to_string(); }
  BasePoint random_base(SplitMix64& rng) const override {
    return make_symbol_point(mechanical_word(slope_, rng.uniform()), 0, window_);
  }
  BasePoint parse_base(std::string_view text) const override {
    return make_symbol_point(mechanical_word(slope_, reduce_unit(parse_real(text, "sturmian intercept"))), 0,
                             window_);
  }

 protected:
  const char* name() const override { return "sturmian"; }

 private:
  double slope_;
};

}  // namespace

PhasePoint MapSystem::evolve(const PhasePoint& p, double t) const {
  if (std::floor(t) != t || std::fabs(t) > 9.0e15)
    throw UsageError(fmt::format("map systems evolve by integer times only (got {})", t));
  return to_phase(step(to_base(p), shift_amount(t)));
}

double MapSystem::dist(const PhasePoint& p, const PhasePoint& q) const { return base_dist(to_base(p), to_base(q)); }

void MapSystem::dist_row(const PhasePoint& p, std::span<const PhasePoint> qs, std::span<double> out) const {
  const BasePoint b = to_base(p);
  for (std::size_t k = 0; k < qs.size(); ++k) out[k] = base_dist(b, to_base(qs[k]));
}

double MapSystem::image_dist(const BasePoint& a, const BasePoint& b) const { return base_dist(step(a, 1), step(b, 1)); }

double MapSystem::cross_dist(const BasePoint& a, const BasePoint& b) const { return base_dist(step(a, 1), b); }

double MapSystem::image_coordinate(const BasePoint& b) const { return base_coordinate(step(b, 1)); }

std::vector<double> MapSystem::coordinates(const PhasePoint& p) const { return base_coordinates(to_base(p)); }

void MapSystem::check_point(const PhasePoint& p) const {
  if (std::holds_alternative<FiberPoint>(p)) throw UsageError(fmt::format("fiber point given to map {}", describe()));
  check_base(to_base(p));
}

PhasePoint MapSystem::random_point(SplitMix64& rng) const { return to_phase(random_base(rng)); }

PhasePoint MapSystem::parse_point(std::string_view text) const {
  if (text.find('@') != std::string_view::npos)
    throw UsageError(fmt::format("map {} has no heights: '{}'", describe(), text));
  return to_phase(parse_base(text));
}

namespace detail {

std::shared_ptr<const MapSystem> make_rotation(double alpha) { return std::make_shared<Rotation>(alpha); }

std::shared_ptr<const MapSystem> make_torus(double alpha1, double alpha2) {
  return std::make_shared<Torus>(alpha1, alpha2);
}

std::shared_ptr<const MapSystem> make_full_shift(int arity, int window) {
  return std::make_shared<FullShift>(arity, window);
}

std::shared_ptr<const MapSystem> make_sturmian(double slope, int window) {
  return std::make_shared<Sturmian>(slope, window);
}

}  // namespace detail

}  // namespace fk
