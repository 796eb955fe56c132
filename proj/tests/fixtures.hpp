#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "fk/partitions.hpp"
#include "fk/rng.hpp"

namespace fixture {

// k x k grid on the unit square of (base, height) coordinates with jittered
// cut points, plus a fat strip along the first interior base cut. The strip
// and a random subset of the grid cells are marked non-open.
inline fk::Partition perturbed_grid(std::shared_ptr<const fk::System> system, fk::SplitMix64& rng, int k) {
  auto cuts = [&] {
    std::vector<double> c = {0.0};
    for (int i = 1; i < k; ++i) c.push_back((i + rng.uniform(-0.3, 0.3)) / k);
    c.push_back(1.0);
    return c;
  };
  const std::vector<double> cx = cuts(), cy = cuts();
  const double strip_lo = cx[1] - rng.uniform(0.005, 0.03), strip_hi = cx[1] + rng.uniform(0.005, 0.03);
  auto in_strip = [=](const std::vector<double>& c) { return c[0] >= strip_lo && c[0] < strip_hi; };

  fk::Partition p("perturbed-grid", system);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      const fk::Box box{{cx[a], cy[b]}, {cx[a + 1], cy[b + 1]}};
      fk::Cell cell;
      cell.name = "c" + std::to_string(a) + "_" + std::to_string(b);
      cell.open = rng.uniform() < 0.5;
      cell.predicate = [system, box, in_strip](const fk::PhasePoint& q) {
        const auto c = system->coordinates(q);
        return box.contains(c) && !in_strip(c);
      };
      p.add_cell(std::move(cell));
    }
  fk::Cell strip;
  strip.name = "strip";
  strip.open = false;
  strip.predicate = [system, in_strip](const fk::PhasePoint& q) { return in_strip(system->coordinates(q)); };
  p.add_cell(std::move(strip));
  return p;
}

inline std::vector<fk::PhasePoint> sample(const fk::System& system, std::size_t n, std::uint64_t seed) {
  fk::SplitMix64 rng(seed);
  std::vector<fk::PhasePoint> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(system.random_point(rng));
  return out;
}

// Piecewise-constant label track with runs of random length, on a grid of
// step 0.05.
inline fk::LabelTrack random_track(fk::SplitMix64& rng, std::size_t m, std::size_t labels, std::size_t mean_run) {
  fk::LabelTrack t;
  t.step = 0.05;
  t.horizon = static_cast<double>(m) * t.step;
  std::size_t cur = rng.below(labels);
  while (t.labels.size() < m) {
    const std::size_t run = 1 + rng.below(2 * mean_run);
    for (std::size_t k = 0; k < run && t.labels.size() < m; ++k) t.labels.push_back(cur);
    cur = (cur + 1 + rng.below(labels - 1)) % labels;
  }
  return t;
}

// Track y with y[j] = x[j + shift] (clamped at the ends).
inline fk::LabelTrack shifted(const fk::LabelTrack& x, long shift) {
  fk::LabelTrack y = x;
  const long m = static_cast<long>(x.size());
  for (long j = 0; j < m; ++j) y.labels[static_cast<std::size_t>(j)] = x.labels[static_cast<std::size_t>(std::clamp(j + shift, 0L, m - 1))];
  return y;
}

// Copy of q whose runs [pos, pos + len) are relabeled with probability
// about `rate` of the samples, to a label outside 0..labels-1.
inline fk::LabelTrack perturbed(fk::SplitMix64& rng, const fk::LabelTrack& q, double rate, std::size_t labels) {
  fk::LabelTrack p = q;
  std::size_t k = 0;
  while (k < p.size()) {
    const std::size_t run = 1 + rng.below(8);
    if (rng.uniform() < rate)
      for (std::size_t j = k; j < k + run && j < p.size(); ++j) p.labels[j] = labels;
    k += run;
  }
  return p;
}

}  // namespace fixture
