#include "fk/partitions.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "fk/errors.hpp"
#include "fk/parallel.hpp"

namespace fk {

bool Box::contains(const std::vector<double>& c) const {
  if (c.size() < lo.size()) return false;
  for (std::size_t d = 0; d < lo.size(); ++d)
    if (!(c[d] >= lo[d] && c[d] < hi[d])) return false;
  return true;
}

Partition::Partition(std::string name, std::shared_ptr<const System> system)
    : name_(std::move(name)), system_(std::move(system)) {}

std::size_t Partition::add_cell(Cell cell) {
  if (!cell.predicate && cell.boxes.empty()) throw UsageError(fmt::format("cell '{}' has no boxes", cell.name));
  cells_.push_back(std::move(cell));
  grid_k_ = 0;
  return cells_.size() - 1;
}

std::size_t Partition::add_rest_cell(std::string name, bool open) {
  if (rest_) throw UsageError("a partition has at most one rest cell");
  cells_.push_back(Cell{std::move(name), open, {}, {}});
  rest_ = cells_.size() - 1;
  return *rest_;
}

std::size_t Partition::label(const PhasePoint& p) const {
  std::vector<double> coords;
  bool have_coords = false;
  auto get_coords = [&]() -> const std::vector<double>& {
    if (!have_coords) {
      if (!system_) throw UsageError(fmt::format("partition '{}' has box cells but no system", name_));
      coords = system_->coordinates(p);
      have_coords = true;
    }
    return coords;
  };
  if (grid_k_ > 0) {
    const auto& c = get_coords();
    std::size_t idx = 0;
    std::size_t scale = 1;
    for (std::size_t d = 0; d < grid_dims_; ++d) {
      const double v = std::floor(c[d] * grid_k_);
      const auto bin = static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(grid_k_ - 1)));
      idx += bin * scale;
      scale *= static_cast<std::size_t>(grid_k_);
    }
    return idx;
  }
  std::optional<std::size_t> found;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (rest_ && i == *rest_) continue;
    const Cell& cell = cells_[i];
    bool in = false;
    if (cell.predicate) {
      in = cell.predicate(p);
    } else {
      const auto& c = get_coords();
      in = std::any_of(cell.boxes.begin(), cell.boxes.end(), [&](const Box& b) { return b.contains(c); });
    }
    if (!in) continue;
    if (found)
      throw UsageError(fmt::format("cells '{}' and '{}' of partition '{}' overlap at {}", cells_[*found].name, cell.name,
                                   name_, to_string(p)));
    found = i;
  }
  if (found) return *found;
  if (rest_) return *rest_;
  throw UsageError(fmt::format("no cell of partition '{}' contains {}", name_, to_string(p)));
}

std::vector<std::size_t> Partition::labels(const std::vector<PhasePoint>& points) const {
  std::vector<std::size_t> out(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) out[k] = label(points[k]);
  return out;
}

namespace {

std::size_t coordinate_dims(const System& system) {
  SplitMix64 rng(0);
  return system.coordinates(system.random_point(rng)).size();
}

}  // namespace

Partition grid_partition(std::shared_ptr<const System> system, int k) {
  if (!system) throw UsageError("grid partition needs a system");
  if (k < 2) throw UsageError(fmt::format("grid partition needs k >= 2, got {}", k));
  SplitMix64 rng(0);
  const PhasePoint probe = system->random_point(rng);
  if (std::holds_alternative<SymbolPoint>(probe))
    throw UsageError(fmt::format("no grid partition for the symbolic space of {}", system->describe()));
  const std::size_t dims = system->coordinates(probe).size();
  std::size_t count = 1;
  for (std::size_t d = 0; d < dims; ++d) count *= static_cast<std::size_t>(k);
  if (count > 100000) throw RefusalError(fmt::format("grid with {} cells is too fine", count));

  Partition p(fmt::format("grid:k={}", k), system);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t idx = 0; idx < count; ++idx) {
    Box box;
    std::string name = "g";
    std::size_t rem = idx;
    for (std::size_t d = 0; d < dims; ++d) {
      const auto bin = static_cast<int>(rem % static_cast<std::size_t>(k));
      rem /= static_cast<std::size_t>(k);
      box.lo.push_back(bin == 0 ? -inf : static_cast<double>(bin) / k);
      box.hi.push_back(bin == k - 1 ? inf : static_cast<double>(bin + 1) / k);
      name += (d == 0 ? "" : "_") + std::to_string(bin);
    }
    p.add_cell(Cell{std::move(name), true, {std::move(box)}, {}});
  }
  p.grid_k_ = k;
  p.grid_dims_ = dims;
  return p;
}

namespace {

struct Token {
  std::string_view text;
  int column = 0;
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || line[i] == '#') break;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

double parse_number(const Token& t, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc() || ptr != t.text.data() + t.text.size() || !std::isfinite(v))
    throw ConfigError(fmt::format("expected a number, got '{}'", t.text), line, t.column);
  return v;
}

}  // namespace

Partition parse_partition_text(std::shared_ptr<const System> system, std::string_view text, std::string name) {
  const std::size_t dims = system ? coordinate_dims(*system) : 2;
  std::vector<Cell> cells;
  std::map<std::string, std::size_t, std::less<>> index;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto toks = tokenize(line);
    if (toks.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (toks[0].text != "cell")
      throw ConfigError(fmt::format("expected 'cell', got '{}'", toks[0].text), line_no, toks[0].column);
    if (toks.size() < 2) throw ConfigError("missing cell label", line_no, static_cast<int>(line.size()) + 1);
    if (toks.size() < 3 || toks[2].text != "box")
      throw ConfigError("expected 'box' after the cell label", line_no,
                        toks.size() < 3 ? static_cast<int>(line.size()) + 1 : toks[2].column);
    const std::size_t nums = toks.size() - 3;
    if (nums != 2 && nums != 4)
      throw ConfigError(fmt::format("a box takes 2 or 4 bounds, got {}", nums), line_no,
                        nums > 4 ? toks[7].column : static_cast<int>(line.size()) + 1);
    Box box;
    for (std::size_t d = 0; d < nums / 2; ++d) {
      const double lo = parse_number(toks[3 + 2 * d], line_no);
      const double hi = parse_number(toks[4 + 2 * d], line_no);
      if (!(lo < hi))
        throw ConfigError(fmt::format("box bounds must satisfy lo < hi, got {} {}", lo, hi), line_no,
                          toks[3 + 2 * d].column);
      box.lo.push_back(lo);
      box.hi.push_back(hi);
    }
    if (box.lo.size() > dims)
      throw ConfigError(fmt::format("box has {} dimensions but points have {} coordinates", box.lo.size(), dims),
                        line_no, toks[3].column);
    const std::string label(toks[1].text);
    auto it = index.find(label);
    if (it == index.end()) {
      it = index.emplace(label, cells.size()).first;
      cells.push_back(Cell{label, true, {}, {}});
    }
    cells[it->second].boxes.push_back(std::move(box));
    if (end == text.size()) break;
  }
  if (cells.size() < 2) throw ConfigError(fmt::format("a partition needs at least 2 cells, got {}", cells.size()), line_no, 1);
  Partition p(std::move(name), std::move(system));
  for (auto& c : cells) p.add_cell(std::move(c));
  return p;
}

Partition parse_partition(std::shared_ptr<const System> system, std::string_view spec) {
  if (spec.starts_with("grid:")) {
    const auto rest = spec.substr(5);
    if (!rest.starts_with("k=")) throw ConfigError("partition", fmt::format("expected grid:k=<int>, got '{}'", spec));
    int k = 0;
    const auto num = rest.substr(2);
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), k);
    if (ec != std::errc() || ptr != num.data() + num.size())
      throw ConfigError("partition", fmt::format("cannot parse grid size '{}'", num));
    if (k < 2) throw ConfigError("partition", fmt::format("grid partition needs k >= 2, got {}", k));
    return grid_partition(std::move(system), k);
  }
  if (spec.starts_with("file:")) {
    const std::string path(spec.substr(5));
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read partition file '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_partition_text(std::move(system), ss.str(), std::string(spec));
  }
  throw ConfigError("partition", fmt::format("expected grid:k=<int> or file:<path>, got '{}'", spec));
}

std::vector<double> cell_masses(const Partition& p, const std::vector<PhasePoint>& sample) {
  if (sample.empty()) throw UsageError("cell masses need a nonempty sample");
  std::vector<double> m(p.size(), 0.0);
  for (auto l : p.labels(sample)) m[l] += 1.0;
  for (auto& v : m) v /= static_cast<double>(sample.size());
  return m;
}

bool essentially_open(const Partition& p, double eps, const std::vector<PhasePoint>& sample) {
  const auto masses = cell_masses(p, sample);
  std::size_t other = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.cell(i).open) continue;
    if (++other > 1 || !(masses[i] < eps)) return false;
  }
  return true;
}

// Shortest augmenting path Hungarian method with potentials, minimizing -w.
std::vector<std::size_t> max_assignment(const std::vector<std::vector<long>>& w) {
  const std::size_t n = w.size();
  for (const auto& row : w)
    if (row.size() != n) throw UsageError("assignment matrix must be square");
  if (n == 0) return {};
  using ll = long long;
  constexpr ll kInfCost = std::numeric_limits<ll>::max() / 4;
  std::vector<ll> u(n + 1, 0), v(n + 1, 0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<ll> minv(n + 1, kInfCost);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      ll delta = kInfCost;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const ll cur = -static_cast<ll>(w[i0 - 1][j - 1]) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t j = 1; j <= n; ++j) out[match[j] - 1] = j - 1;
  return out;
}

std::vector<std::vector<long>> overlap_matrix(const std::vector<std::size_t>& lp, std::size_t np,
                                              const std::vector<std::size_t>& lq, std::size_t nq) {
  if (lp.size() != lq.size()) throw UsageError("label lists differ in length");
  const std::size_t n = std::max(np, nq);
  std::vector<std::vector<long>> o(n, std::vector<long>(n, 0));
  for (std::size_t k = 0; k < lp.size(); ++k) {
    if (lp[k] >= np || lq[k] >= nq) throw UsageError("label out of range");
    ++o[lp[k]][lq[k]];
  }
  return o;
}

double d_mu_from_labels(const std::vector<std::size_t>& lp, std::size_t np, const std::vector<std::size_t>& lq,
                        std::size_t nq) {
  if (lp.empty()) throw UsageError("d_mu needs a nonempty sample");
  const auto o = overlap_matrix(lp, np, lq, nq);
  const auto sigma = max_assignment(o);
  long agree = 0;
  for (std::size_t i = 0; i < o.size(); ++i) agree += o[i][sigma[i]];
  return 1.0 - static_cast<double>(agree) / static_cast<double>(lp.size());
}

double d_mu(const Partition& p, const Partition& q, const EmpiricalMeasure& sample) {
  if (sample.size() == 0) throw UsageError("d_mu needs a nonempty sample");
  return d_mu_from_labels(p.labels(sample.atoms), p.size(), q.labels(sample.atoms), q.size());
}

Partition essentialize(const Partition& p, double eps, const EmpiricalMeasure& sample) {
  if (!(eps > 0.0 && eps <= 1.0)) throw UsageError(fmt::format("epsilon must lie in (0, 1], got {}", eps));
  const std::size_t n = p.size();
  const auto required = static_cast<std::size_t>(std::ceil(4.0 * static_cast<double>(n) / eps - 1e-9));
  if (sample.size() < required)
    throw RefusalError(fmt::format("essentialize with {} cells at eps = {} needs a sample of at least {} points, got {}",
                                   n, eps, required, sample.size()));
  bool all_open = true;
  for (std::size_t i = 0; i < n; ++i) all_open = all_open && p.cell(i).open;
  if (all_open) return p;
  const auto& system = p.system();
  if (!system) throw UsageError("essentialize needs the partition's system for its metric");

  const auto& pts = sample.atoms;
  const std::size_t N = pts.size();
  const auto lab = p.labels(pts);
  std::vector<double> iso(N, std::numeric_limits<double>::infinity());
  parallel_for(N, [&](std::size_t a) {
    std::vector<double> row(N);
    system->dist_row(pts[a], pts, row);
    for (std::size_t b = 0; b < N; ++b)
      if (lab[b] != lab[a]) iso[a] = std::min(iso[a], row[b]);
  });

  struct Ball {
    PhasePoint center;
    double radius;
  };
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t a = 0; a < N; ++a) members[lab[a]].push_back(a);

  Partition out(fmt::format("essentialize({}, eps={})", p.name(), eps), system);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = members[i];
    std::stable_sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return iso[a] < iso[b]; });
    const auto drop =
        static_cast<std::size_t>(std::floor(eps * static_cast<double>(m.size()) / (4.0 * static_cast<double>(n))));
    auto balls = std::make_shared<std::vector<Ball>>();
    for (std::size_t k = drop; k < m.size(); ++k) balls->push_back({pts[m[k]], 0.5 * iso[m[k]]});
    Cell cell;
    cell.name = p.cell(i).name;
    cell.open = true;
    cell.predicate = [balls, system](const PhasePoint& q) {
      for (const auto& b : *balls)
        if (system->dist(q, b.center) < b.radius) return true;
      return false;
    };
    out.add_cell(std::move(cell));
  }
  out.add_rest_cell("rest", false);
  return out;
}

}  // namespace fk
