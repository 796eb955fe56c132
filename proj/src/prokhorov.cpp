#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "fk/errors.hpp"
#include "fk/measures.hpp"
#include "fk/parallel.hpp"

namespace fk {

DistanceMatrix distance_matrix(const System& system, const std::vector<PhasePoint>& a,
                               const std::vector<PhasePoint>& b) {
  DistanceMatrix m;
  m.rows = a.size();
  m.cols = b.size();
  m.d.resize(m.rows * m.cols);
  parallel_for(m.rows, [&](std::size_t i) {
    system.dist_row(a[i], b, std::span<double>(m.d.data() + i * m.cols, m.cols));
  });
  return m;
}

namespace {

constexpr std::int32_t kFree = -1;

// Row-wise entries of a distance matrix at or below a cap.
struct SparseDist {
  std::size_t rows = 0, cols = 0;
  std::vector<std::size_t> start;
  std::vector<std::int32_t> col;
  std::vector<double> val;

  SparseDist(const DistanceMatrix& dist, double cap) : rows(dist.rows), cols(dist.cols) {
    start.assign(rows + 1, 0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = dist.d.data() + i * cols;
      for (std::size_t j = 0; j < cols; ++j)
        if (row[j] <= cap) {
          col.push_back(static_cast<std::int32_t>(j));
          val.push_back(row[j]);
        }
      start[i + 1] = col.size();
    }
  }

  void restrict_to(double cap) {
    std::size_t out = 0, from = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t end = start[i + 1];
      for (std::size_t e = from; e < end; ++e)
        if (val[e] <= cap) {
          col[out] = col[e];
          val[out] = val[e];
          ++out;
        }
      from = end;
      start[i + 1] = out;
    }
    col.resize(out);
    val.resize(out);
  }
};

// Hopcroft-Karp on atom-split units; adjacency is kept at atom level.
class UnitMatcher {
 public:
  UnitMatcher(const SparseDist& dist, double eps, std::size_t units)
      : m_(dist.rows), n_(dist.cols), ra_(units / dist.rows), rb_(units / dist.cols), units_(units) {
    start_.assign(m_ + 1, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t e = dist.start[i]; e < dist.start[i + 1]; ++e)
        if (dist.val[e] <= eps) adj_.push_back(dist.col[e]);
      start_[i + 1] = adj_.size();
    }
    match_l_.assign(units_, kFree);
    match_r_.assign(units_, kFree);
  }

  void warm_start(const std::vector<std::int32_t>& ml, const std::vector<std::int32_t>& mr) {
    match_l_ = ml;
    match_r_ = mr;
  }

  std::size_t solve() {
    greedy();
    while (bfs()) {
      iter_.assign(units_, 0);
      for (std::size_t u = 0; u < units_; ++u)
        if (match_l_[u] == kFree) dfs(static_cast<std::int32_t>(u));
    }
    std::size_t c = 0;
    for (auto v : match_l_) c += v != kFree;
    return c;
  }

  const std::vector<std::int32_t>& match_l() const { return match_l_; }
  const std::vector<std::int32_t>& match_r() const { return match_r_; }
  std::size_t ra() const { return ra_; }
  std::size_t rb() const { return rb_; }

  // mu atoms with a unit reachable from a free unit by alternating paths.
  std::vector<std::size_t> reachable_atoms() const {
    std::vector<char> seen_l(units_, 0), seen_r(units_, 0);
    std::vector<std::int32_t> queue;
    for (std::size_t u = 0; u < units_; ++u)
      if (match_l_[u] == kFree) {
        seen_l[u] = 1;
        queue.push_back(static_cast<std::int32_t>(u));
      }
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto u = static_cast<std::size_t>(queue[q]);
      const std::size_t a = u / ra_;
      for (std::size_t e = start_[a]; e < start_[a + 1]; ++e)
        for (std::size_t c = 0; c < rb_; ++c) {
          const std::size_t v = static_cast<std::size_t>(adj_[e]) * rb_ + c;
          if (seen_r[v]) continue;
          seen_r[v] = 1;
          const auto w = match_r_[v];
          if (w != kFree && !seen_l[static_cast<std::size_t>(w)]) {
            seen_l[static_cast<std::size_t>(w)] = 1;
            queue.push_back(w);
          }
        }
    }
    std::vector<std::size_t> atoms;
    for (std::size_t a = 0; a < m_; ++a)
      for (std::size_t c = 0; c < ra_; ++c)
        if (seen_l[a * ra_ + c]) {
          atoms.push_back(a);
          break;
        }
    return atoms;
  }

 private:
  std::size_t degree_units(std::size_t a) const { return (start_[a + 1] - start_[a]) * rb_; }
  std::size_t neighbor(std::size_t a, std::size_t k) const {
    return static_cast<std::size_t>(adj_[start_[a] + k / rb_]) * rb_ + k % rb_;
  }

  void greedy() {
    std::vector<std::size_t> next_copy(n_, 0);
    for (std::size_t v = 0; v < units_; ++v)
      if (match_r_[v] != kFree) next_copy[v / rb_] = std::max(next_copy[v / rb_], v % rb_ + 1);
    for (std::size_t u = 0; u < units_; ++u) {
      if (match_l_[u] != kFree) continue;
      const std::size_t a = u / ra_;
      for (std::size_t e = start_[a]; e < start_[a + 1]; ++e) {
        const auto b = static_cast<std::size_t>(adj_[e]);
        bool done = false;
        while (next_copy[b] < rb_) {
          const std::size_t v = b * rb_ + next_copy[b]++;
          if (match_r_[v] == kFree) {
            match_l_[u] = static_cast<std::int32_t>(v);
            match_r_[v] = static_cast<std::int32_t>(u);
            done = true;
            break;
          }
        }
        if (done) break;
      }
    }
  }

  bool bfs() {
    layer_.assign(units_, -1);
    std::vector<std::int32_t> queue;
    for (std::size_t u = 0; u < units_; ++u)
      if (match_l_[u] == kFree) {
        layer_[u] = 0;
        queue.push_back(static_cast<std::int32_t>(u));
      }
    bool found = false;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const auto u = static_cast<std::size_t>(queue[q]);
      const std::size_t a = u / ra_;
      const std::size_t deg = degree_units(a);
      for (std::size_t k = 0; k < deg; ++k) {
        const auto w = match_r_[neighbor(a, k)];
        if (w == kFree) {
          found = true;
        } else if (layer_[static_cast<std::size_t>(w)] < 0) {
          layer_[static_cast<std::size_t>(w)] = layer_[u] + 1;
          queue.push_back(w);
        }
      }
    }
    return found;
  }

  bool dfs(std::int32_t u0) {
    // Iterative layered DFS; stack holds left units.
    std::vector<std::int32_t> stack{u0};
    std::vector<std::size_t> via;  // right unit used to reach stack[k+1]
    while (!stack.empty()) {
      const auto u = static_cast<std::size_t>(stack.back());
      const std::size_t a = u / ra_;
      const std::size_t deg = degree_units(a);
      bool advanced = false;
      while (iter_[u] < deg) {
        const std::size_t v = neighbor(a, iter_[u]++);
        const auto w = match_r_[v];
        if (w == kFree) {
          // Augment along the stack.
          via.push_back(v);
          for (std::size_t k = stack.size(); k-- > 0;) {
            const auto lu = static_cast<std::size_t>(stack[k]);
            const std::size_t rv = via[k];
            match_l_[lu] = static_cast<std::int32_t>(rv);
            match_r_[rv] = static_cast<std::int32_t>(lu);
          }
          return true;
        }
        if (layer_[static_cast<std::size_t>(w)] == layer_[u] + 1) {
          via.push_back(v);
          stack.push_back(w);
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        layer_[u] = -1;
        stack.pop_back();
        if (!via.empty()) via.pop_back();
      }
    }
    return false;
  }

  std::size_t m_, n_, ra_, rb_, units_;
  std::vector<std::size_t> start_;
  std::vector<std::int32_t> adj_;
  std::vector<std::int32_t> match_l_, match_r_;
  std::vector<int> layer_;
  std::vector<std::size_t> iter_;
};

std::size_t unit_count(const DistanceMatrix& dist) {
  if (dist.rows == 0 || dist.cols == 0) throw UsageError("empirical measures must be nonempty");
  if (dist.rows > kMaxAtoms || dist.cols > kMaxAtoms)
    throw RefusalError(fmt::format("{} and {} atoms exceed the {}-atom limit; subsample the orbits", dist.rows,
                                   dist.cols, kMaxAtoms));
  const std::size_t l = std::lcm(dist.rows, dist.cols);
  if (l > kMaxUnits)
    throw RefusalError(fmt::format("atom counts {} and {} need {} coupling units (limit {}); choose commensurate sizes",
                                   dist.rows, dist.cols, l, kMaxUnits));
  return l;
}

std::size_t units_needed(double eps, std::size_t units) {
  const double need = (1.0 - eps) * static_cast<double>(units);
  if (need <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(need - 1e-9));
}

struct Warm {
  double eps = -1.0;
  std::vector<std::int32_t> ml, mr;
};

// dist holds every entry <= eps.
CouplingCertificate decide(const SparseDist& dist, double eps, std::size_t units, Warm* warm) {
  CouplingCertificate c;
  c.epsilon = eps;
  c.units = units;
  c.needed = units_needed(eps, units);
  UnitMatcher hk(dist, eps, units);
  if (warm && warm->eps >= 0.0 && warm->eps <= eps) hk.warm_start(warm->ml, warm->mr);
  c.matched = hk.solve();
  c.feasible = c.matched >= c.needed;
  if (c.feasible) {
    const auto& ml = hk.match_l();
    for (std::size_t u = 0; u < units; ++u)
      if (ml[u] != kFree) c.pairs.emplace_back(u / hk.ra(), static_cast<std::size_t>(ml[u]) / hk.rb());
    return c;
  }
  if (warm && eps >= warm->eps) {
    warm->eps = eps;
    warm->ml = hk.match_l();
    warm->mr = hk.match_r();
  }
  c.witness = hk.reachable_atoms();
  std::vector<char> in_hull(dist.cols, 0);
  for (auto a : c.witness)
    for (std::size_t e = dist.start[a]; e < dist.start[a + 1]; ++e)
      if (dist.val[e] <= eps) in_hull[static_cast<std::size_t>(dist.col[e])] = 1;
  c.witness_mass = static_cast<double>(c.witness.size()) / static_cast<double>(dist.rows);
  c.witness_hull_mass =
      static_cast<double>(std::count(in_hull.begin(), in_hull.end(), 1)) / static_cast<double>(dist.cols);
  return c;
}

}  // namespace

CouplingCertificate coupling_feasible(const DistanceMatrix& dist, double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError(fmt::format("epsilon must lie in (0,1], got {}", eps));
  const std::size_t units = unit_count(dist);
  return decide(SparseDist(dist, eps), eps, units, nullptr);
}

CouplingCertificate coupling_feasible(const System& system, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                      double eps) {
  return coupling_feasible(distance_matrix(system, mu.atoms, nu.atoms), eps);
}

bool validate_certificate(const DistanceMatrix& dist, const CouplingCertificate& c) {
  const double eps = c.epsilon;
  if (c.units == 0 || c.units % dist.rows || c.units % dist.cols) return false;
  if (c.feasible) {
    const std::size_t ra = c.units / dist.rows;
    const std::size_t rb = c.units / dist.cols;
    std::vector<std::size_t> used_a(dist.rows, 0), used_b(dist.cols, 0);
    for (const auto& [a, b] : c.pairs) {
      if (a >= dist.rows || b >= dist.cols) return false;
      if (!(dist(a, b) <= eps)) return false;
      if (++used_a[a] > ra || ++used_b[b] > rb) return false;
    }
    return static_cast<double>(c.pairs.size()) >= (1.0 - eps) * static_cast<double>(c.units) - 1e-9;
  }
  std::vector<char> in_b(dist.rows, 0);
  for (auto a : c.witness) {
    if (a >= dist.rows) return false;
    in_b[a] = 1;
  }
  std::size_t hull = 0;
  for (std::size_t b = 0; b < dist.cols; ++b)
    for (std::size_t a = 0; a < dist.rows; ++a)
      if (in_b[a] && dist(a, b) <= eps) {
        ++hull;
        break;
      }
  const double mass = static_cast<double>(std::count(in_b.begin(), in_b.end(), 1)) / static_cast<double>(dist.rows);
  const double hull_mass = static_cast<double>(hull) / static_cast<double>(dist.cols);
  return mass > hull_mass + eps;
}

ProkhorovResult prokhorov(const DistanceMatrix& dist) {
  const std::size_t units = unit_count(dist);
  ProkhorovResult r;
  Warm warm;
  // Entries above a feasible level are never needed again.
  std::optional<SparseDist> active;
  auto check = [&](double eps) {
    ++r.checks;
    std::optional<SparseDist> fresh;
    if (!active) fresh.emplace(dist, eps);
    CouplingCertificate c = decide(active ? *active : *fresh, eps, units, &warm);
    if (!c.feasible && (!r.witness || r.witness->epsilon < eps)) r.witness = c;
    if (c.feasible) {
      if (active) active->restrict_to(eps);
      else active = std::move(fresh);
    }
    return c;
  };

  // Least feasible k/L; k = L needs no mass and is always feasible. Gallop up
  // from k = 0 while checks are cheap, then bisect.
  long lo = -1;
  long hi = static_cast<long>(units);
  CouplingCertificate best;
  best.feasible = true;
  best.epsilon = 1.0;
  best.units = units;
  best.needed = 0;
  for (long k = 0; k < hi; k = k == 0 ? 1 : 2 * k) {
    CouplingCertificate c = check(static_cast<double>(k) / static_cast<double>(units));
    if (c.feasible) {
      hi = k;
      best = std::move(c);
      break;
    }
    lo = k;
  }
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    CouplingCertificate c = check(static_cast<double>(mid) / static_cast<double>(units));
    if (c.feasible) {
      hi = mid;
      best = std::move(c);
    } else {
      lo = mid;
    }
  }
  const double v1 = static_cast<double>(hi) / static_cast<double>(units);

  std::vector<double> cands;
  for (double d : active ? active->val : dist.d)
    if (d < v1) cands.push_back(d);
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  long dlo = -1;
  long dhi = static_cast<long>(cands.size());
  while (dhi - dlo > 1) {
    const long mid = dlo + (dhi - dlo) / 2;
    const double eps = cands[static_cast<std::size_t>(mid)];
    CouplingCertificate c = check(eps);
    if (c.feasible) {
      dhi = mid;
      best = std::move(c);
    } else {
      dlo = mid;
    }
  }
  r.value = dhi < static_cast<long>(cands.size()) ? cands[static_cast<std::size_t>(dhi)] : v1;
  r.certificate = std::move(best);
  if (r.witness && r.witness->epsilon >= r.value) r.witness.reset();
  return r;
}

ProkhorovResult prokhorov(const System& system, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.size() > kMaxAtoms || nu.size() > kMaxAtoms)
    throw RefusalError(fmt::format("{} and {} atoms exceed the {}-atom limit; subsample the orbits", mu.size(),
                                   nu.size(), kMaxAtoms));
  return prokhorov(distance_matrix(system, mu.atoms, nu.atoms));
}

}  // namespace fk
