#include "fk/matching.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <functional>

#include "fk/errors.hpp"
#include "fk/parallel.hpp"

namespace fk {

bool Matching::valid_on(const BitMatrix& m) const {
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (i >= n || j >= n || i >= m.rows() || j >= m.cols() || !m.get(i, j)) return false;
    if (k > 0 && (i <= pairs[k - 1].first || j <= pairs[k - 1].second)) return false;
  }
  return true;
}

std::size_t tail_start(std::size_t count) { return (3 * count) / 4; }

GapEstimate make_gap_estimate(std::vector<double> horizons, std::vector<double> gaps) {
  GapEstimate g;
  g.horizons = std::move(horizons);
  g.gaps = std::move(gaps);
  g.tail_sup = 0.0;
  for (std::size_t k = tail_start(g.gaps.size()); k < g.gaps.size(); ++k) g.tail_sup = std::max(g.tail_sup, g.gaps[k]);
  return g;
}

BitMatrix compat_matrix(const System& system, const OrbitSample& ox, const OrbitSample& oy, double delta) {
  if (ox.step != oy.step) throw UsageError(fmt::format("orbit steps differ ({} vs {})", ox.step, oy.step));
  if (ox.size() == 0 || oy.size() == 0) throw UsageError("empty orbit sample");
  const std::size_t n = std::max(ox.size(), oy.size());
  BitMatrix m(n, n);
  parallel_for(ox.size(), [&](std::size_t i) {
    std::vector<double> d(oy.size());
    system.dist_row(ox.points[i], oy.points, d);
    std::uint64_t* row = m.row(i);
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d[j] < delta) row[j / 64] |= std::uint64_t{1} << (j % 64);
  });
  return m;
}

namespace {

// One row of the bit-parallel LCS recurrence: V' = (V + (V & M)) | (V & ~M).
// Zero bits of V among the first j columns count the chain length against the
// first j columns.
void lcs_row(std::vector<std::uint64_t>& v, const std::uint64_t* match, std::uint64_t last_mask) {
  std::uint64_t carry = 0;
  const std::size_t w = v.size();
  for (std::size_t k = 0; k < w; ++k) {
    const std::uint64_t x = v[k];
    const std::uint64_t u = x & match[k];
    const std::uint64_t partial = x + u;
    const std::uint64_t sum = partial + carry;
    carry = (partial < x || sum < partial) ? 1 : 0;
    v[k] = sum | (x & ~u);
  }
  v[w - 1] &= last_mask;
}

std::size_t zeros_in_prefix(const std::uint64_t* v, std::size_t j) {
  std::size_t ones = 0;
  const std::size_t full = j / 64;
  for (std::size_t k = 0; k < full; ++k) ones += static_cast<std::size_t>(std::popcount(v[k]));
  if (j % 64) ones += static_cast<std::size_t>(std::popcount(v[full] & ((std::uint64_t{1} << (j % 64)) - 1)));
  return j - ones;
}

std::uint64_t last_word_mask(std::size_t cols) {
  return cols % 64 == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << (cols % 64)) - 1;
}

}  // namespace

std::size_t max_matching_size(const BitMatrix& m) {
  if (m.empty()) throw UsageError("empty compatibility matrix");
  std::vector<std::uint64_t> v(m.words(), ~std::uint64_t{0});
  const std::uint64_t mask = last_word_mask(m.cols());
  v.back() &= mask;
  for (std::size_t i = 0; i < m.rows(); ++i) lcs_row(v, m.row(i), mask);
  return zeros_in_prefix(v.data(), m.cols());
}

std::vector<std::size_t> prefix_matching_sizes(const BitMatrix& m, std::span<const std::size_t> prefixes) {
  if (m.empty()) throw UsageError("empty compatibility matrix");
  std::vector<std::size_t> out(prefixes.size(), 0);
  std::vector<std::uint64_t> v(m.words(), ~std::uint64_t{0});
  const std::uint64_t mask = last_word_mask(m.cols());
  v.back() &= mask;
  std::size_t done = 0;
  for (std::size_t k = 0; k < prefixes.size(); ++k) {
    const std::size_t p = prefixes[k];
    if (p > m.rows() || p > m.cols() || (k > 0 && p < prefixes[k - 1]))
      throw UsageError(fmt::format("prefix {} invalid for a {}x{} matrix", p, m.rows(), m.cols()));
    for (; done < p; ++done) lcs_row(v, m.row(done), mask);
    out[k] = zeros_in_prefix(v.data(), p);
  }
  return out;
}

Matching max_matching(const BitMatrix& m) {
  if (m.empty()) throw UsageError("empty compatibility matrix");
  const std::size_t r = m.rows();
  const std::size_t c = m.cols();
  if (static_cast<double>(r) * static_cast<double>(c) > 4e8)
    throw RefusalError(fmt::format("explicit matching of a {}x{} matrix exceeds the 4e8-cell limit", r, c));
  // Suffix table: row i holds the LCS state of rows i.. against reversed
  // columns, so S(i, j) = zeros among the first c - j bits.
  const std::size_t w = m.words();
  const std::uint64_t mask = last_word_mask(c);
  BitMatrix rev(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = m.next_set(i, 0); j < c; j = m.next_set(i, j + 1)) rev.set(i, c - 1 - j);
  std::vector<std::uint64_t> table((r + 1) * w, 0);
  std::vector<std::uint64_t> v(w, ~std::uint64_t{0});
  v.back() &= mask;
  std::copy(v.begin(), v.end(), table.begin() + static_cast<std::ptrdiff_t>(r * w));
  for (std::size_t i = r; i-- > 0;) {
    lcs_row(v, rev.row(i), mask);
    std::copy(v.begin(), v.end(), table.begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  auto suffix = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i >= r || j >= c) return 0;
    return zeros_in_prefix(table.data() + i * w, c - j);
  };

  Matching out;
  out.n = std::max(r, c);
  std::size_t need = suffix(0, 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < r && need > 0; ++i) {
    const std::size_t jj = m.next_set(i, j);
    if (jj >= c) continue;
    if (suffix(i + 1, jj + 1) + 1 == need) {
      out.pairs.emplace_back(i, jj);
      --need;
      j = jj + 1;
    }
  }
  return out;
}

Matching max_matching_bruteforce(const BitMatrix& m) {
  if (m.empty()) throw UsageError("empty compatibility matrix");
  const std::size_t r = m.rows();
  const std::size_t c = m.cols();
  if (std::max(r, c) > 14) throw RefusalError(fmt::format("brute-force matching refuses n = {} > 14", std::max(r, c)));
  std::vector<std::pair<std::size_t, std::size_t>> current;
  std::vector<std::pair<std::size_t, std::size_t>> best;
  std::function<void(std::size_t, std::size_t)> search = [&](std::size_t i0, std::size_t j0) {
    if (current.size() > best.size()) best = current;
    if (current.size() + std::min(r - i0, c - j0) <= best.size()) return;
    for (std::size_t i = i0; i < r; ++i)
      for (std::size_t j = j0; j < c; ++j)
        if (m.get(i, j)) {
          current.emplace_back(i, j);
          search(i + 1, j + 1);
          current.pop_back();
        }
  };
  search(0, 0);
  Matching out;
  out.n = std::max(r, c);
  out.pairs = std::move(best);
  return out;
}

double fbar_gap(const System& system, const PhasePoint& x, const PhasePoint& y, std::size_t n, double delta) {
  if (n == 0) throw UsageError("fbar_gap needs n >= 1");
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  const auto ox = sample_orbit(system, x, static_cast<double>(n), 1.0);
  const auto oy = sample_orbit(system, y, static_cast<double>(n), 1.0);
  const auto m = compat_matrix(system, ox, oy, delta);
  return 1.0 - static_cast<double>(max_matching_size(m)) / static_cast<double>(n);
}

namespace {

void check_horizons(const std::vector<std::size_t>& horizons) {
  if (horizons.size() < 4) throw UsageError(fmt::format("need at least 4 horizons, got {}", horizons.size()));
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    if (horizons[k] == 0) throw UsageError("horizons must be positive");
    if (k > 0 && horizons[k] <= horizons[k - 1]) throw UsageError("horizons must be strictly increasing");
  }
}

GapEstimate fbar_from_orbits(const System& system, const OrbitSample& ox, const OrbitSample& oy, double delta,
                             const std::vector<std::size_t>& horizons) {
  const auto m = compat_matrix(system, ox, oy, delta);
  const auto sizes = prefix_matching_sizes(m, horizons);
  std::vector<double> hs, gaps;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    hs.push_back(static_cast<double>(horizons[k]));
    gaps.push_back(1.0 - static_cast<double>(sizes[k]) / static_cast<double>(horizons[k]));
  }
  return make_gap_estimate(std::move(hs), std::move(gaps));
}

}  // namespace

GapEstimate fbar_limsup(const System& system, const PhasePoint& x, const PhasePoint& y, double delta,
                        const std::vector<std::size_t>& horizons) {
  check_horizons(horizons);
  if (!(delta > 0.0)) throw UsageError(fmt::format("delta must be positive, got {}", delta));
  const double h = static_cast<double>(horizons.back());
  const auto ox = sample_orbit(system, x, h, 1.0);
  const auto oy = sample_orbit(system, y, h, 1.0);
  return fbar_from_orbits(system, ox, oy, delta, horizons);
}

RhoResult rho_fk(const System& system, const PhasePoint& x, const PhasePoint& y,
                 const std::vector<std::size_t>& horizons, double tol) {
  check_horizons(horizons);
  if (!(tol > 0.0)) throw UsageError(fmt::format("tolerance must be positive, got {}", tol));
  const double h = static_cast<double>(horizons.back());
  const auto ox = sample_orbit(system, x, h, 1.0);
  const auto oy = sample_orbit(system, y, h, 1.0);
  auto holds = [&](double delta) { return fbar_from_orbits(system, ox, oy, delta, horizons).tail_sup <= delta; };
  RhoResult r;
  r.lo = 0.0;
  r.hi = system.diameter();
  if (!holds(r.hi)) {
    r.bracketed = false;
    r.value = r.hi;
    return r;
  }
  while (r.hi - r.lo > tol) {
    const double mid = 0.5 * (r.lo + r.hi);
    ++r.iterations;
    if (holds(mid))
      r.hi = mid;
    else
      r.lo = mid;
  }
  r.value = 0.5 * (r.lo + r.hi);
  return r;
}

}  // namespace fk
