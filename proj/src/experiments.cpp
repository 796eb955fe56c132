#include "fk/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "fk/errors.hpp"
#include "fk/flow_matching.hpp"
#include "fk/matching.hpp"
#include "fk/measures.hpp"
#include "fk/parallel.hpp"
#include "fk/partitions.hpp"
#include "fk/systems.hpp"

namespace fk {

namespace {

OptionSpec required(std::string key, std::string help) { return {std::move(key), std::move(help), std::nullopt}; }
OptionSpec optional(std::string key, std::string help) { return {std::move(key), std::move(help), std::string()}; }
OptionSpec with_default(std::string key, std::string help, std::string value) {
  return {std::move(key), std::move(help), std::move(value)};
}

const OptionSpec kSystem = required("system", "system spec, e.g. rotation:alpha=0.618 or suspend(rotation:alpha=0.618)");
const OptionSpec kX = optional("x", "first point(s), ';'-separated");
const OptionSpec kY = optional("y", "second point(s), ';'-separated");
const OptionSpec kPairs = optional("pairs", "random:<count>,seed=<int>; overrides x/y");
const OptionSpec kStep = with_default("step", "sampling grid step for flows", "0.05");
const OptionSpec kTol = with_default("tol", "bisection width on epsilon", "0.0078125");
const OptionSpec kPartition = required("partition", "grid:k=<k> or file:<path>");
const OptionSpec kSample = with_default("sample", "<count>,seed=<int> random points of the reference measure", "200,seed=1");

std::vector<ExperimentSpec> build_specs() {
  return {
      {"fbar",
       "discrete gap f_{n,delta}(x,y) on a horizon grid (flows use their time-1 map)",
       {"n", "gap", "tail_sup"},
       {kSystem, required("x", "first point"), required("y", "second point"), required("delta", "closeness threshold"),
        required("horizons", "integer horizons, comma-separated")}},
      {"rho-fk",
       "discrete Feldman-Katok distance by bisection on delta",
       {"i", "x", "y", "rho_fk", "lo", "hi", "tol", "bracketed"},
       {kSystem, kX, kY, kPairs, required("horizons", "at least 4 increasing integer horizons"),
        with_default("tol", "bisection width on delta", "0.001")}},
      {"ftilde",
       "flow gap ftilde_{t,delta}(x,y) on a horizon grid",
       {"t", "gap", "diagonal_bound", "tail_sup"},
       {kSystem, required("x", "first point"), required("y", "second point"), required("delta", "closeness threshold"),
        required("horizons", "horizons, comma-separated"), kStep, kTol}},
      {"rho-fk-flow",
       "flow Feldman-Katok distance by bisection on delta",
       {"i", "x", "y", "rho_fk_flow", "lo", "hi", "tol", "horizon_max"},
       {kSystem, kX, kY, kPairs, required("horizons", "at least 4 increasing horizons"),
        with_default("tol", "bisection width on delta", "0.01"), kStep,
        with_default("eps-tol", "bisection width on epsilon", "0.0078125")}},
      {"fk-matrix",
       "rho_fk_flow for all point pairs (x_i, y_j)",
       {"i", "j", "x_i", "y_j", "rho_fk_flow", "tol", "horizon_max"},
       {kSystem, required("xs", "row points: random:<count>,seed=<int> or ';'-separated"),
        optional("ys", "column points (default: the row points)"),
        required("horizons", "at least 4 increasing horizons"), with_default("tol", "bisection width on delta", "0.01"),
        kStep, with_default("eps-tol", "bisection width on epsilon", "0.0078125")}},
      {"prokhorov",
       "Prokhorov distance of the empirical orbit measures, with coupling certificates",
       {"i", "x", "y", "t", "atoms", "prokhorov", "checks", "certificate_valid"},
       {kSystem, kX, kY, kPairs, required("t", "orbit horizon"), kStep}},
      {"prop-fk-measure",
       "D_P(mu_x,t, mu_y,t) <= max(delta, 2 eps*) + eta for each pair",
       {"i", "x", "y", "epsilon_star", "prokhorov", "bound", "slack", "pass"},
       {kSystem, kX, kY, kPairs, required("delta", "closeness threshold"), required("t", "orbit horizon"), kStep, kTol}},
      {"lift-check",
       "lift of (n+1, delta)-matchings of the time-1 map to (t, eps, eps)-matchings, independently checked",
       {"i", "x", "y", "n", "delta", "eps", "pi_size", "d0", "coverage", "max_dist", "status"},
       {kSystem, kX, kY, kPairs, with_default("n", "discrete horizon (t = n + 1)", "100"),
        with_default("delta", "discrete closeness threshold", "0.05"), with_default("eps", "target epsilon", "0.2"),
        with_default("offset", "random pairs: y = phi^(shift + u offset)(x), u uniform", "0.01"),
        with_default("shift", "random pairs: integer shift drawn from [-shift, shift]", "0"), kStep}},
      {"ratner-gap",
       "Ratner partition gap f_t(x, y, P)",
       {"i", "x", "y", "t", "gap"},
       {kSystem, kX, kY, kPairs, kPartition, required("t", "horizon"), kStep, kTol}},
      {"cover",
       "greedy (t, eps, P)-cover of a random sample; count is an upper bound on K_t",
       {"t", "count", "covered", "shortfall", "sample"},
       {kSystem, kPartition, required("t", "horizons, comma-separated"), with_default("eps", "ball radius and mass", "0.1"),
        kSample, kStep}},
      {"beta",
       "log K_t / u(t) on a horizon grid and its tail infimum",
       {"t", "count", "beta", "tail_inf"},
       {kSystem, kPartition, with_default("eps", "ball radius and mass", "0.1"),
        with_default("u", "identity | log | sqrt", "identity"), required("horizons", "at least 4 increasing horizons"),
        kSample, kStep}},
      {"transfer-lemma",
       "restriction of a certified Q-matching to the P/Q agreement set, eps' <= 4 eps + 2 d(P,Q) + delta",
       {"i", "x", "y", "eps", "d_pq", "freq_x", "freq_y", "in_h", "eps_prime", "bound", "within_bound", "check_ok"},
       {kSystem, kX, kY, kPairs, kPartition, required("partition-q", "second partition"), required("t", "horizon"),
        with_default("delta", "uniformity margin", "0.1"), with_default("sample", "sample for d(P,Q)", "2000,seed=1"),
        kStep, kTol}},
      {"dmu",
       "partition distance d_mu(P, Q) and the essentially open approximation of P",
       {"d_mu", "eps", "essential_d_mu", "rest_mass", "essentially_open", "sample"},
       {kSystem, kPartition, required("partition-q", "second partition"), with_default("eps", "essentialize level", "0.1"),
        with_default("sample", "<count>,seed=<int>", "4000,seed=1")}},
  };
}

}  // namespace

const std::vector<ExperimentSpec>& experiment_specs() {
  static const std::vector<ExperimentSpec> specs = build_specs();
  return specs;
}

const ExperimentSpec& experiment_spec(std::string_view name) {
  for (const auto& s : experiment_specs())
    if (s.name == name) return s;
  throw ConfigError("experiment", fmt::format("unknown experiment '{}'", name));
}

ExperimentConfig::ExperimentConfig(std::string experiment, std::map<std::string, std::string> values)
    : experiment_(std::move(experiment)), values_(std::move(values)) {
  const auto& spec = experiment_spec(experiment_);
  for (const auto& [k, v] : values_) {
    const bool known = std::any_of(spec.options.begin(), spec.options.end(), [&](const OptionSpec& o) { return o.key == k; });
    if (!known) throw ConfigError(k, fmt::format("not an option of experiment '{}'", experiment_));
  }
}

std::optional<std::string> ExperimentConfig::lookup(const std::string& key) const {
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  for (const auto& o : experiment_spec(experiment_).options)
    if (o.key == key) return o.default_value;
  throw std::logic_error(fmt::format("experiment '{}' reads undeclared option '{}'", experiment_, key));
}

std::optional<std::string> ExperimentConfig::maybe(const std::string& key) const {
  auto v = lookup(key);
  if (!v || v->empty()) return std::nullopt;
  used_[key] = *v;
  return v;
}

std::string ExperimentConfig::str(const std::string& key) const {
  auto v = maybe(key);
  if (!v) throw ConfigError(key, "missing required option");
  return *v;
}

namespace {

double to_real(std::string_view text, const std::string& key) {
  double v = 0.0;
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError(key, fmt::format("expected a number, got '{}'", text));
  return v;
}

long to_integer(std::string_view text, const std::string& key) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError(key, fmt::format("expected an integer, got '{}'", text));
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(sep, pos);
    out.push_back(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

double ExperimentConfig::real(const std::string& key) const { return to_real(str(key), key); }

long ExperimentConfig::integer(const std::string& key) const { return to_integer(str(key), key); }

std::vector<double> ExperimentConfig::reals(const std::string& key) const {
  std::vector<double> out;
  const std::string text = str(key);
  for (auto part : split(text, ',')) out.push_back(to_real(part, key));
  return out;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  int line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b == line.size()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no, static_cast<int>(b) + 1);
    std::size_t e = eq;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    const std::string key(line.substr(b, e - b));
    if (key.empty()) throw ConfigError("missing key before '='", line_no, static_cast<int>(eq) + 1);
    for (std::size_t k = 0; k < key.size(); ++k) {
      const char c = key[k];
      if (!(std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
            c == '_'))
        throw ConfigError(fmt::format("invalid character '{}' in key", c), line_no, static_cast<int>(b + k) + 1);
    }
    std::size_t vb = eq + 1;
    while (vb < line.size() && std::isspace(static_cast<unsigned char>(line[vb]))) ++vb;
    std::size_t ve = line.size();
    while (ve > vb && std::isspace(static_cast<unsigned char>(line[ve - 1]))) --ve;
    if (vb == ve) throw ConfigError(fmt::format("missing value for '{}'", key), line_no, static_cast<int>(eq) + 2);
    if (out.count(key)) throw ConfigError(fmt::format("duplicate key '{}'", key), line_no, static_cast<int>(b) + 1);
    out[key] = std::string(line.substr(vb, ve - vb));
  }
  return out;
}

PointSpec parse_point_spec(std::string_view text, std::string_view field) {
  PointSpec s;
  const std::string key(field);
  if (text.starts_with("random:")) {
    const auto parts = split(text.substr(7), ',');
    if (parts.size() != 2 || !parts[1].starts_with("seed="))
      throw ConfigError(key, fmt::format("expected random:<count>,seed=<int>, got '{}'", text));
    const long count = to_integer(parts[0], key);
    const long seed = to_integer(parts[1].substr(5), key);
    if (count < 1) throw ConfigError(key, fmt::format("point count must be positive, got {}", count));
    if (seed < 0) throw ConfigError(key, fmt::format("seed must be nonnegative, got {}", seed));
    s.random = true;
    s.count = static_cast<std::size_t>(count);
    s.seed = static_cast<std::uint64_t>(seed);
    return s;
  }
  for (auto p : split(text, ';'))
    if (!p.empty()) s.explicit_points.emplace_back(p);
  if (s.explicit_points.empty()) throw ConfigError(key, "no points given");
  return s;
}

namespace {

struct Points {
  std::vector<PhasePoint> points;
  std::vector<std::string> names;
};

std::string point_name(const PhasePoint& p) {
  std::string s = to_string(p);
  if (s.size() > 64) s = s.substr(0, 61) + "...";
  return s;
}

Points parse_points(const System& system, const std::string& text, const std::string& field) {
  const PointSpec spec = parse_point_spec(text, field);
  Points out;
  if (spec.random) {
    SplitMix64 rng(spec.seed);
    for (std::size_t k = 0; k < spec.count; ++k) {
      out.points.push_back(system.random_point(rng));
      out.names.push_back(point_name(out.points.back()));
    }
    return out;
  }
  for (const auto& t : spec.explicit_points) {
    try {
      PhasePoint p = system.parse_point(t);
      system.check_point(p);
      out.points.push_back(std::move(p));
    } catch (const UsageError& e) {
      throw ConfigError(field, e.what());
    }
    out.names.push_back(t);
  }
  return out;
}

// `<count>,seed=<int>` random points of the system's reference measure.
std::vector<PhasePoint> parse_sample(const System& system, const std::string& text, const std::string& field) {
  const auto parts = split(text, ',');
  if (parts.size() != 2 || !parts[1].starts_with("seed="))
    throw ConfigError(field, fmt::format("expected <count>,seed=<int>, got '{}'", text));
  return parse_points(system, fmt::format("random:{},{}", parts[0], parts[1]), field).points;
}

struct Pairs {
  Points x;
  Points y;
  std::size_t size() const { return x.points.size(); }
};

// Random pairs draw x and y alternately from one generator.
Pairs parse_pairs(const ExperimentConfig& c, const System& system) {
  Pairs out;
  if (auto p = c.maybe("pairs")) {
    const PointSpec spec = parse_point_spec(*p, "pairs");
    if (!spec.random) throw ConfigError("pairs", "expected random:<count>,seed=<int>");
    SplitMix64 rng(spec.seed);
    for (std::size_t k = 0; k < spec.count; ++k) {
      out.x.points.push_back(system.random_point(rng));
      out.y.points.push_back(system.random_point(rng));
      out.x.names.push_back(point_name(out.x.points.back()));
      out.y.names.push_back(point_name(out.y.points.back()));
    }
    return out;
  }
  auto xs = c.maybe("x");
  auto ys = c.maybe("y");
  if (!xs || !ys) throw ConfigError("pairs", "give either pairs or both x and y");
  out.x = parse_points(system, *xs, "x");
  out.y = parse_points(system, *ys, "y");
  if (out.x.points.size() != out.y.points.size())
    throw ConfigError("y", fmt::format("{} x points but {} y points", out.x.points.size(), out.y.points.size()));
  return out;
}

std::vector<std::size_t> integer_horizons(const ExperimentConfig& c, const std::string& key) {
  std::vector<std::size_t> out;
  for (double h : c.reals(key)) {
    if (h < 1.0 || h != std::floor(h)) throw ConfigError(key, fmt::format("horizon {} is not a positive integer", h));
    out.push_back(static_cast<std::size_t>(h));
  }
  return out;
}

double tail_value(const GapEstimate& g) { return g.tail_sup; }

void require_positive(double v, const std::string& key) {
  if (!(v > 0.0)) throw ConfigError(key, fmt::format("must be positive, got {}", v));
}

RunReport run_fbar(const ExperimentConfig& c, const System& s, RunReport r) {
  const PhasePoint x = parse_points(s, c.str("x"), "x").points.at(0);
  const PhasePoint y = parse_points(s, c.str("y"), "y").points.at(0);
  const double delta = c.real("delta");
  require_positive(delta, "delta");
  const auto horizons = integer_horizons(c, "horizons");
  const GapEstimate g = fbar_limsup(s, x, y, delta, horizons);
  for (std::size_t k = 0; k < g.horizons.size(); ++k)
    r.add_row({static_cast<std::int64_t>(g.horizons[k]), g.gaps[k], tail_value(g)});
  return r;
}

RunReport run_rho_fk(const ExperimentConfig& c, const System& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, s);
  const auto horizons = integer_horizons(c, "horizons");
  const double tol = c.real("tol");
  require_positive(tol, "tol");
  std::vector<RhoResult> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) { out[k] = rho_fk(s, pairs.x.points[k], pairs.y.points[k], horizons, tol); });
  for (std::size_t k = 0; k < out.size(); ++k)
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], out[k].value, out[k].lo, out[k].hi, tol,
               out[k].bracketed});
  return r;
}

RunReport run_ftilde(const ExperimentConfig& c, const System& s, RunReport r) {
  const PhasePoint x = parse_points(s, c.str("x"), "x").points.at(0);
  const PhasePoint y = parse_points(s, c.str("y"), "y").points.at(0);
  const double delta = c.real("delta");
  require_positive(delta, "delta");
  const auto horizons = c.reals("horizons");
  const double step = c.real("step");
  const double tol = c.real("tol");
  std::vector<FtildeResult> out(horizons.size());
  parallel_for(horizons.size(), [&](std::size_t k) {
    out[k] = ftilde_gap_detail(s, x, y, horizons[k], delta, step, tol, false);
  });
  std::vector<double> gaps;
  for (const auto& f : out) gaps.push_back(f.value);
  const GapEstimate g = make_gap_estimate(horizons, gaps);
  for (std::size_t k = 0; k < horizons.size(); ++k) r.add_row({horizons[k], out[k].value, out[k].diagonal_bound, g.tail_sup});
  return r;
}

RunReport run_rho_fk_flow(const ExperimentConfig& c, const System& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, s);
  const auto horizons = c.reals("horizons");
  const double tol = c.real("tol");
  const double step = c.real("step");
  const double eps_tol = c.real("eps-tol");
  std::vector<RhoResult> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    out[k] = rho_fk_flow(s, pairs.x.points[k], pairs.y.points[k], horizons, tol, step, eps_tol);
  });
  for (std::size_t k = 0; k < out.size(); ++k)
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], out[k].value, out[k].lo, out[k].hi, tol,
               horizons.back()});
  return r;
}

RunReport run_fk_matrix(const ExperimentConfig& c, const System& s, RunReport r) {
  const Points xs = parse_points(s, c.str("xs"), "xs");
  const auto ys_text = c.maybe("ys");
  const Points ys = ys_text ? parse_points(s, *ys_text, "ys") : xs;
  const auto horizons = c.reals("horizons");
  const double tol = c.real("tol");
  const double step = c.real("step");
  const double eps_tol = c.real("eps-tol");
  const std::size_t nx = xs.points.size(), ny = ys.points.size();
  std::vector<double> out(nx * ny);
  parallel_for(nx * ny, [&](std::size_t k) {
    out[k] = rho_fk_flow(s, xs.points[k / ny], ys.points[k % ny], horizons, tol, step, eps_tol).value;
  });
  for (std::size_t k = 0; k < out.size(); ++k)
    r.add_row({static_cast<std::int64_t>(k / ny), static_cast<std::int64_t>(k % ny), xs.names[k / ny], ys.names[k % ny],
               out[k], tol, horizons.back()});
  return r;
}

OrbitSample measure_orbit(const System& s, const PhasePoint& p, double t, double step) {
  if (!s.is_flow()) step = 1.0;
  return sample_orbit(s, p, t, step);
}

RunReport run_prokhorov(const ExperimentConfig& c, const System& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, s);
  const double t = c.real("t");
  require_positive(t, "t");
  const double step = s.is_flow() ? c.real("step") : 1.0;
  struct Out {
    double value = 0.0;
    std::size_t atoms = 0;
    std::size_t checks = 0;
    bool valid = false;
  };
  std::vector<Out> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto ox = measure_orbit(s, pairs.x.points[k], t, step);
    const auto oy = measure_orbit(s, pairs.y.points[k], t, step);
    if (ox.size() > kMaxAtoms)
      throw RefusalError(fmt::format("{} atoms exceed the {}-atom limit", ox.size(), kMaxAtoms));
    const auto dist = distance_matrix(s, ox.points, oy.points);
    const ProkhorovResult p = prokhorov(dist);
    bool valid = validate_certificate(dist, p.certificate);
    if (p.witness) valid = valid && validate_certificate(dist, *p.witness);
    out[k] = {p.value, ox.size(), p.checks, valid};
  });
  bool all = true;
  for (std::size_t k = 0; k < out.size(); ++k) {
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], t,
               static_cast<std::int64_t>(out[k].atoms), out[k].value, static_cast<std::int64_t>(out[k].checks),
               out[k].valid});
    all = all && out[k].valid;
  }
  r.add_verdict("certificates_valid", all, "coupling at the value and witness below it re-validated");
  return r;
}

RunReport run_prop_fk_measure(const ExperimentConfig& c, const System& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, s);
  const double delta = c.real("delta");
  const double t = c.real("t");
  const double step = c.real("step");
  const double tol = c.real("tol");
  std::vector<FkMeasureReport> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    out[k] = fk_measure_check(s, pairs.x.points[k], pairs.y.points[k], t, delta, step, tol);
  });
  std::size_t fails = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& f = out[k];
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], f.epsilon_star, f.prokhorov, f.bound,
               f.slack, f.pass});
    fails += f.pass ? 0 : 1;
  }
  r.add_verdict("prokhorov_bound", fails == 0, fmt::format("{} of {} pairs violate the bound", fails, out.size()));
  return r;
}

RunReport run_lift_check(const ExperimentConfig& c, const System& s, RunReport r) {
  if (!s.is_flow()) throw ConfigError("system", "lift-check needs a flow");
  const long n_long = c.integer("n");
  if (n_long < 2) throw ConfigError("n", fmt::format("must be at least 2, got {}", n_long));
  const auto n = static_cast<std::size_t>(n_long);
  const double delta = c.real("delta");
  const double eps = c.real("eps");
  const double step = c.real("step");
  Pairs pairs;
  if (auto p = c.maybe("pairs")) {
    const PointSpec spec = parse_point_spec(*p, "pairs");
    if (!spec.random) throw ConfigError("pairs", "expected random:<count>,seed=<int>");
    const double offset = c.real("offset");
    const long shift = c.integer("shift");
    if (offset < 0.0) throw ConfigError("offset", "must be nonnegative");
    if (shift < 0) throw ConfigError("shift", "must be nonnegative");
    SplitMix64 rng(spec.seed);
    for (std::size_t k = 0; k < spec.count; ++k) {
      const PhasePoint x = s.random_point(rng);
      const double j = static_cast<double>(rng.below(static_cast<std::uint64_t>(2 * shift + 1))) - static_cast<double>(shift);
      const PhasePoint y = s.evolve(x, j + rng.uniform() * offset);
      pairs.x.points.push_back(x);
      pairs.y.points.push_back(y);
      pairs.x.names.push_back(point_name(x));
      pairs.y.names.push_back(point_name(y));
    }
  } else {
    pairs = parse_pairs(c, s);
  }
  struct Out {
    std::size_t pi = 0, d0 = 0;
    double coverage = 0.0, max_dist = 0.0;
    std::string status;
    bool ok = true;
  };
  std::vector<Out> out(pairs.size());
  const double t = static_cast<double>(n + 1);
  parallel_for(pairs.size(), [&](std::size_t k) {
    Out& o = out[k];
    const auto dx = sample_orbit(s, pairs.x.points[k], t, 1.0);
    const auto dy = sample_orbit(s, pairs.y.points[k], t, 1.0);
    const Matching pi = max_matching(compat_matrix(s, dx, dy, delta));
    o.pi = pi.size();
    LiftResult lift;
    try {
      lift = lift_matching(pi, n, delta, eps);
    } catch (const ConstructionError& e) {
      o.status = std::string("precondition: ") + e.what();
      return;
    }
    o.d0 = lift.d0;
    o.coverage = lift.matching.coverage;
    const auto ox = sample_orbit(s, pairs.x.points[k], t, step);
    const auto oy = sample_orbit(s, pairs.y.points[k], t, step);
    const CheckResult chk = check_cont_matching(s, ox, oy, lift.matching, {eps, eps, 0.0, 2});
    o.max_dist = chk.max_dist;
    const bool d0_ok = lift.d0 + 2 >= pi.size();
    o.ok = chk.ok && d0_ok;
    o.status = chk.ok ? (d0_ok ? "certified" : "d0 below |pi| - 2") : "rejected: " + chk.reason;
  });
  std::size_t checked = 0, bad = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& o = out[k];
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], static_cast<std::int64_t>(n), delta, eps,
               static_cast<std::int64_t>(o.pi), static_cast<std::int64_t>(o.d0), o.coverage, o.max_dist, o.status});
    if (!o.status.starts_with("precondition")) {
      ++checked;
      bad += o.ok ? 0 : 1;
    }
  }
  r.add_verdict("lift_certified", bad == 0,
                fmt::format("{} of {} lifts meeting the preconditions rejected ({} pairs skipped)", bad, checked,
                            out.size() - checked));
  return r;
}

RunReport run_ratner_gap(const ExperimentConfig& c, const std::shared_ptr<const System>& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, *s);
  const Partition p = parse_partition(s, c.str("partition"));
  const double t = c.real("t");
  const double step = c.real("step");
  const double tol = c.real("tol");
  std::vector<double> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    out[k] = ratner_gap(*s, pairs.x.points[k], pairs.y.points[k], t, p, step, tol);
  });
  for (std::size_t k = 0; k < out.size(); ++k)
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], t, out[k]});
  return r;
}

RunReport run_cover(const ExperimentConfig& c, const std::shared_ptr<const System>& s, RunReport r) {
  const Partition p = parse_partition(s, c.str("partition"));
  const auto ts = c.reals("t");
  const double eps = c.real("eps");
  const auto sample = parse_sample(*s, c.str("sample"), "sample");
  const double step = c.real("step");
  nlohmann::json centers = nlohmann::json::array();
  for (double t : ts) {
    const CoverResult cr = covering_number(*s, sample, t, eps, p, 1.0 - eps, step);
    r.add_row({t, static_cast<std::int64_t>(cr.count), cr.covered, cr.shortfall, static_cast<std::int64_t>(cr.sample)});
    centers.push_back(cr.centers);
  }
  r.details["centers"] = std::move(centers);
  r.details["note"] = "greedy counts are upper bounds on K_t; masses are sample fractions";
  return r;
}

RunReport run_beta(const ExperimentConfig& c, const std::shared_ptr<const System>& s, RunReport r) {
  const Partition p = parse_partition(s, c.str("partition"));
  const double eps = c.real("eps");
  const UFunction u = UFunction::parse(c.str("u"));
  const auto horizons = c.reals("horizons");
  const auto sample = parse_sample(*s, c.str("sample"), "sample");
  const double step = c.real("step");
  const BetaCurve b = beta_estimate(*s, sample, eps, p, u, horizons, step);
  for (std::size_t k = 0; k < b.horizons.size(); ++k)
    r.add_row({b.horizons[k], static_cast<std::int64_t>(b.counts[k]), b.values[k], b.tail_inf});
  r.details["note"] = "finite-grid surrogate: tail_inf is the minimum over the last quartile of horizons";
  return r;
}

RunReport run_transfer(const ExperimentConfig& c, const std::shared_ptr<const System>& s, RunReport r) {
  const Pairs pairs = parse_pairs(c, *s);
  const Partition P = parse_partition(s, c.str("partition"));
  const Partition Q = parse_partition(s, c.str("partition-q"));
  const double t = c.real("t");
  const double delta = c.real("delta");
  require_positive(delta, "delta");
  const double step = c.real("step");
  const double tol = c.real("tol");
  const auto sample = parse_sample(*s, c.str("sample"), "sample");
  const double d_pq = d_mu(P, Q, uniform_measure(sample));
  if (!s->is_flow()) throw ConfigError("system", "transfer-lemma needs a flow");
  const auto m = static_cast<std::size_t>(std::floor(t / step + 1e-9));
  struct Out {
    double eps = 1.0;
    TransferResult tr;
    bool check_ok = false;
    bool have = false;
  };
  std::vector<Out> out(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto ox = sample_orbit(*s, pairs.x.points[k], static_cast<double>(m) * step, step);
    const auto oy = sample_orbit(*s, pairs.y.points[k], static_cast<double>(m) * step, step);
    const LabelTrack px = label_track(P, ox), qx = label_track(Q, ox), py = label_track(P, oy), qy = label_track(Q, oy);
    const FtildeResult fq = ratner_gap_tracks(qx, qy, tol, true);
    Out& o = out[k];
    if (!fq.certificate) return;
    o.have = true;
    o.eps = fq.certificate->epsilon;
    o.tr = transfer_matching(*fq.certificate, px, qx, py, qy, d_pq, delta);
    o.check_ok = !o.tr.feasible || check_label_matching(px, py, o.tr.matching, o.tr.epsilon_prime).ok;
  });
  std::size_t in_h = 0, bad = 0;
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& o = out[k];
    r.add_row({static_cast<std::int64_t>(k), pairs.x.names[k], pairs.y.names[k], o.eps, d_pq, o.tr.freq_x, o.tr.freq_y,
               o.tr.in_h, o.tr.epsilon_prime, o.tr.bound, o.tr.within_bound, o.check_ok});
    if (o.have && o.tr.in_h) {
      ++in_h;
      bad += (o.tr.within_bound && o.check_ok) ? 0 : 1;
    }
  }
  r.add_verdict("transfer_bound", bad == 0,
                fmt::format("{} violations among {} pairs in the uniform set H ({} pairs total)", bad, in_h, out.size()));
  r.details["slack"] = kTransferSlack;
  return r;
}

RunReport run_dmu(const ExperimentConfig& c, const std::shared_ptr<const System>& s, RunReport r) {
  const Partition P = parse_partition(s, c.str("partition"));
  const Partition Q = parse_partition(s, c.str("partition-q"));
  const double eps = c.real("eps");
  const auto sample = uniform_measure(parse_sample(*s, c.str("sample"), "sample"));
  const double d = d_mu(P, Q, sample);
  const Partition E = essentialize(P, eps, sample);
  const double de = d_mu(P, E, sample);
  double rest = 0.0;
  if (E.rest()) rest = cell_masses(E, sample.atoms)[*E.rest()];
  const bool open = essentially_open(E, eps, sample.atoms);
  r.add_row({d, eps, de, rest, open, static_cast<std::int64_t>(sample.size())});
  r.add_verdict("density", de < eps, fmt::format("d_mu(P, essentialize(P)) = {} vs eps = {}", de, eps));
  r.add_verdict("essentially_open", open);
  return r;
}

}  // namespace

RunReport run(const ExperimentConfig& c) {
  const ExperimentSpec& spec = experiment_spec(c.experiment());
  RunReport r;
  r.experiment = spec.name;
  r.columns = spec.columns;
  const std::shared_ptr<const System> system = make_system(c.str("system"));
  const std::string& e = spec.name;
  if (e == "fbar") r = run_fbar(c, *system, std::move(r));
  else if (e == "rho-fk") r = run_rho_fk(c, *system, std::move(r));
  else if (e == "ftilde") r = run_ftilde(c, *system, std::move(r));
  else if (e == "rho-fk-flow") r = run_rho_fk_flow(c, *system, std::move(r));
  else if (e == "fk-matrix") r = run_fk_matrix(c, *system, std::move(r));
  else if (e == "prokhorov") r = run_prokhorov(c, *system, std::move(r));
  else if (e == "prop-fk-measure") r = run_prop_fk_measure(c, *system, std::move(r));
  else if (e == "lift-check") r = run_lift_check(c, *system, std::move(r));
  else if (e == "ratner-gap") r = run_ratner_gap(c, system, std::move(r));
  else if (e == "cover") r = run_cover(c, system, std::move(r));
  else if (e == "beta") r = run_beta(c, system, std::move(r));
  else if (e == "transfer-lemma") r = run_transfer(c, system, std::move(r));
  else if (e == "dmu") r = run_dmu(c, system, std::move(r));
  r.config = c.used();
  return r;
}

}  // namespace fk
