#include <fmt/format.h>

#include <cmath>

#include "fk/errors.hpp"
#include "fk/phase_point.hpp"
#include "fk/rng.hpp"

namespace fk {

namespace {

class PeriodicWord final : public SymbolSource {
 public:
  PeriodicWord(std::vector<std::uint8_t> word, int arity) : word_(std::move(word)), arity_(arity) {}
  int arity() const override { return arity_; }
  std::uint8_t at(std::int64_t index) const override {
    const auto n = static_cast<std::int64_t>(word_.size());
    return word_[static_cast<std::size_t>(((index % n) + n) % n)];
  }
  std::string to_string() const override {
    std::string s;
    for (auto c : word_) s += static_cast<char>('0' + c);
    return s;
  }

 private:
  std::vector<std::uint8_t> word_;
  int arity_;
};

class HashedSequence final : public SymbolSource {
 public:
  HashedSequence(std::uint64_t seed, int arity) : seed_(seed), arity_(arity) {}
  int arity() const override { return arity_; }
  std::uint8_t at(std::int64_t index) const override {
    return static_cast<std::uint8_t>(hash_index(seed_, index) % static_cast<std::uint64_t>(arity_));
  }
  std::string to_string() const override { return fmt::format("seed:{}", seed_); }

 private:
  std::uint64_t seed_;
  int arity_;
};

class MechanicalWord final : public SymbolSource {
 public:
  MechanicalWord(double slope, double intercept) : slope_(slope), intercept_(intercept) {}
  int arity() const override { return 2; }
  std::uint8_t at(std::int64_t index) const override {
    const double i = static_cast<double>(index);
    return static_cast<std::uint8_t>(std::floor((i + 1.0) * slope_ + intercept_) - std::floor(i * slope_ + intercept_));
  }
  std::string to_string() const override { return fmt::format("{}", intercept_); }

 private:
  double slope_;
  double intercept_;
};

}  // namespace

std::shared_ptr<const SymbolSource> periodic_word(std::vector<std::uint8_t> word, int arity) {
  if (word.empty()) throw UsageError("periodic word must be nonempty");
  for (auto c : word)
    if (c >= arity) throw UsageError(fmt::format("symbol {} outside alphabet of arity {}", int(c), arity));
  return std::make_shared<PeriodicWord>(std::move(word), arity);
}

std::shared_ptr<const SymbolSource> hashed_sequence(std::uint64_t seed, int arity) {
  return std::make_shared<HashedSequence>(seed, arity);
}

std::shared_ptr<const SymbolSource> mechanical_word(double slope, double intercept) {
  return std::make_shared<MechanicalWord>(slope, intercept);
}

SymbolPoint make_symbol_point(std::shared_ptr<const SymbolSource> source, std::int64_t offset, int window) {
  SymbolPoint p;
  p.offset = offset;
  p.symbols.resize(static_cast<std::size_t>(window) + 1);
  for (int i = 0; i <= window; ++i) p.symbols[static_cast<std::size_t>(i)] = source->at(offset + i);
  p.source = std::move(source);
  return p;
}

BasePoint to_base(const PhasePoint& p) {
  if (auto c = std::get_if<CirclePoint>(&p)) return *c;
  if (auto t = std::get_if<TorusPoint>(&p)) return *t;
  if (auto s = std::get_if<SymbolPoint>(&p)) return *s;
  throw UsageError("fiber point has no base-point representation");
}

PhasePoint to_phase(const BasePoint& b) {
  return std::visit([](const auto& v) -> PhasePoint { return v; }, b);
}

namespace {

std::string base_string(const BasePoint& b) {
  if (auto c = std::get_if<CirclePoint>(&b)) return fmt::format("{}", c->x);
  if (auto t = std::get_if<TorusPoint>(&b)) return fmt::format("{},{}", t->x, t->y);
  const auto& s = std::get<SymbolPoint>(b);
  std::string w;
  for (auto c : s.window()) w += static_cast<char>('0' + c);
  return w;
}

}  // namespace

std::string to_string(const PhasePoint& p) {
  if (auto f = std::get_if<FiberPoint>(&p)) return fmt::format("{}@{}", base_string(f->base), f->height);
  return base_string(to_base(p));
}

double reduce_unit(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0 - 1e-12) r = 0.0;
  return r;
}

}  // namespace fk
