#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fk/bit_matrix.hpp"
#include "fk/systems.hpp"

namespace fk {

// Order-preserving partial matching of two index windows of length n.
struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t n = 0;

  std::size_t size() const { return pairs.size(); }
  // Strictly increasing in both coordinates, indices < n, every pair allowed by m.
  bool valid_on(const BitMatrix& m) const;
};

// Finite-horizon data standing in for a limsup: the gap curve and its
// maximum over the last quartile of horizons.
struct GapEstimate {
  std::vector<double> horizons;
  std::vector<double> gaps;
  double tail_sup = 0.0;
};

GapEstimate make_gap_estimate(std::vector<double> horizons, std::vector<double> gaps);
// Index of the first horizon in the last quartile.
std::size_t tail_start(std::size_t count);

// M[i][j] = dist(x_i, y_j) < delta. Orbits of unequal length are padded with
// all-false rows/columns to a square matrix.
BitMatrix compat_matrix(const System& system, const OrbitSample& ox, const OrbitSample& oy, double delta);

// Longest order-preserving chain of true cells (bit-parallel LCS).
std::size_t max_matching_size(const BitMatrix& m);
// Chain lengths restricted to the leading k x k block for every k in
// prefixes, computed in one pass.
std::vector<std::size_t> prefix_matching_sizes(const BitMatrix& m, std::span<const std::size_t> prefixes);
// A maximum matching; among all maximum matchings the lexicographically
// smallest pair sequence. Refuses matrices above 4e8 cells.
Matching max_matching(const BitMatrix& m);
// Exhaustive search; refuses n > 14.
Matching max_matching_bruteforce(const BitMatrix& m);

// 1 - |max matching| / n on length-n orbit windows. Flows are sampled at time step 1.
double fbar_gap(const System& system, const PhasePoint& x, const PhasePoint& y, std::size_t n, double delta);
GapEstimate fbar_limsup(const System& system, const PhasePoint& x, const PhasePoint& y, double delta,
                        const std::vector<std::size_t>& horizons);

struct RhoResult {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int iterations = 0;
  // False when the predicate already fails at the top of the bracket (the
  // space diameter); value is then the diameter.
  bool bracketed = true;
};

// Bisection on delta in (0, diameter] for the predicate tail_sup <= delta.
RhoResult rho_fk(const System& system, const PhasePoint& x, const PhasePoint& y,
                 const std::vector<std::size_t>& horizons, double tol);

}  // namespace fk
