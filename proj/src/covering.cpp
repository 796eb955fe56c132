#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "fk/errors.hpp"
#include "fk/matching.hpp"
#include "fk/parallel.hpp"
#include "fk/partitions.hpp"

namespace fk {

CoverResult greedy_cover(const std::vector<std::vector<bool>>& member, double mass_target) {
  const std::size_t n = member.size();
  if (n == 0) throw UsageError("cover of an empty sample");
  for (const auto& row : member)
    if (row.size() != n) throw UsageError("ball matrix must be square");
  CoverResult r;
  r.sample = n;
  std::vector<char> covered(n, 0);
  std::size_t count = 0;
  auto mass = [&] { return static_cast<double>(count) / static_cast<double>(n); };
  while (!(mass() > mass_target)) {
    std::size_t best = n, gain = 0;
    for (std::size_t c = 0; c < n; ++c) {
      if (covered[c]) continue;
      std::size_t g = 0;
      for (std::size_t y = 0; y < n; ++y) g += (!covered[y] && member[c][y]) ? 1 : 0;
      if (g > gain) best = c, gain = g;
    }
    if (best == n) {
      r.shortfall = true;
      break;
    }
    r.centers.push_back(best);
    for (std::size_t y = 0; y < n; ++y)
      if (member[best][y] && !covered[y]) covered[y] = 1, ++count;
  }
  r.count = r.centers.size();
  r.covered = mass();
  return r;
}

std::vector<std::vector<bool>> ball_matrix(const std::vector<LabelTrack>& tracks, double eps) {
  const std::size_t n = tracks.size();
  // The DP rule is symmetric under transposition, so each unordered pair is decided once.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  std::vector<char> in(pairs.size(), 0);
  parallel_for(pairs.size(), [&](std::size_t k) {
    in[k] = ball_member_tracks(tracks[pairs[k].first], tracks[pairs[k].second], eps) ? 1 : 0;
  });
  std::vector<std::vector<bool>> member(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a) member[a][a] = true;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (in[k]) member[pairs[k].first][pairs[k].second] = member[pairs[k].second][pairs[k].first] = true;
  return member;
}

namespace {

std::vector<LabelTrack> sample_tracks(const System& system, const std::vector<PhasePoint>& sample, double t,
                                      const Partition& p, double step) {
  if (!system.is_flow()) throw UsageError("covers use Ratner matchings, which are defined for flows");
  if (!(step > 0.0 && step <= 0.1)) throw UsageError(fmt::format("grid step must lie in (0, 0.1], got {}", step));
  if (!(t > 1.0)) throw UsageError(fmt::format("horizon t must exceed 1, got {}", t));
  const auto m = static_cast<std::size_t>(std::floor(t / step + 1e-9));
  std::vector<LabelTrack> tracks(sample.size());
  parallel_for(sample.size(), [&](std::size_t k) {
    tracks[k] = label_track(p, sample_orbit(system, sample[k], static_cast<double>(m) * step, step));
  });
  return tracks;
}

}  // namespace

CoverResult covering_number(const System& system, const std::vector<PhasePoint>& sample, double t, double eps,
                            const Partition& p, double mass_target, double step) {
  if (sample.size() < 50) throw UsageError(fmt::format("covering needs at least 50 sample points, got {}", sample.size()));
  if (!(eps > 0.0 && eps < 1.0)) throw UsageError(fmt::format("epsilon must lie in (0, 1), got {}", eps));
  return greedy_cover(ball_matrix(sample_tracks(system, sample, t, p, step), eps), mass_target);
}

UFunction UFunction::parse(std::string_view name) {
  if (name == "identity") return UFunction(Kind::Identity);
  if (name == "log") return UFunction(Kind::Log);
  if (name == "sqrt") return UFunction(Kind::Sqrt);
  throw ConfigError("u", fmt::format("expected identity, log or sqrt, got '{}'", name));
}

double UFunction::operator()(double t) const {
  switch (kind_) {
    case Kind::Identity:
      return t;
    case Kind::Log:
      return std::log1p(t);
    case Kind::Sqrt:
      return std::sqrt(t);
  }
  return t;
}

std::string UFunction::name() const {
  switch (kind_) {
    case Kind::Identity:
      return "identity";
    case Kind::Log:
      return "log";
    case Kind::Sqrt:
      return "sqrt";
  }
  return "identity";
}

BetaCurve beta_from_counts(const std::vector<double>& horizons, const std::vector<std::size_t>& counts,
                           const UFunction& u) {
  if (horizons.size() < 4) throw UsageError(fmt::format("beta needs at least 4 horizons, got {}", horizons.size()));
  if (counts.size() != horizons.size()) throw UsageError("one count per horizon");
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    if (!(horizons[k] > 0.0)) throw UsageError("horizons must be positive");
    if (k > 0 && !(horizons[k] > horizons[k - 1])) throw UsageError("horizons must be strictly increasing");
    if (counts[k] == 0) throw UsageError("covering counts are at least 1");
  }
  BetaCurve b;
  b.horizons = horizons;
  b.counts = counts;
  for (std::size_t k = 0; k < horizons.size(); ++k)
    b.values.push_back(std::log(static_cast<double>(counts[k])) / u(horizons[k]));
  const std::size_t from = tail_start(horizons.size());
  b.tail_inf = *std::min_element(b.values.begin() + static_cast<std::ptrdiff_t>(from), b.values.end());
  return b;
}

BetaCurve beta_estimate(const System& system, const std::vector<PhasePoint>& sample, double eps,
                        const Partition& p, const UFunction& u, const std::vector<double>& horizons, double step) {
  if (horizons.size() < 4) throw UsageError(fmt::format("beta needs at least 4 horizons, got {}", horizons.size()));
  std::vector<std::size_t> counts;
  for (double t : horizons) counts.push_back(covering_number(system, sample, t, eps, p, 1.0 - eps, step).count);
  return beta_from_counts(horizons, counts, u);
}

ESurrogate e_surrogate(const std::vector<std::vector<double>>& beta_tail_inf, std::vector<double> eps_family,
                       std::vector<std::string> partitions) {
  if (beta_tail_inf.size() != partitions.size() || partitions.empty())
    throw UsageError("one row of beta values per partition");
  ESurrogate e;
  e.eps_family = std::move(eps_family);
  e.partitions = std::move(partitions);
  e.beta = beta_tail_inf;
  for (const auto& row : beta_tail_inf) {
    if (row.size() != e.eps_family.size() || row.empty()) throw UsageError("one beta value per epsilon");
    e.e_u_p.push_back(*std::max_element(row.begin(), row.end()));
  }
  e.e_phi_u = *std::max_element(e.e_u_p.begin(), e.e_u_p.end());
  return e;
}

nlohmann::json to_json(const CoverResult& r) {
  return {{"count", r.count},       {"centers", r.centers}, {"covered", r.covered},
          {"shortfall", r.shortfall}, {"sample", r.sample},  {"upper_bound", true}};
}

nlohmann::json to_json(const BetaCurve& b) {
  return {{"horizons", b.horizons}, {"counts", b.counts}, {"values", b.values}, {"tail_inf", b.tail_inf}};
}

}  // namespace fk
