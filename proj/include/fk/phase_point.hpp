#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fk {

// Bi-infinite symbol sequence with random access. Points of the shift spaces
// are (source, offset) pairs; the visible window is materialized in the point.
class SymbolSource {
 public:
  virtual ~SymbolSource() = default;
  virtual int arity() const = 0;
  virtual std::uint8_t at(std::int64_t index) const = 0;
  virtual std::string to_string() const = 0;
};

// Periodic extension of a finite word (word[i mod |word|]).
std::shared_ptr<const SymbolSource> periodic_word(std::vector<std::uint8_t> word, int arity);
// Deterministic pseudo-random sequence: symbol i is hash(seed, i) mod arity.
std::shared_ptr<const SymbolSource> hashed_sequence(std::uint64_t seed, int arity);
// Mechanical (Sturmian) word: s_i = floor((i+1) slope + intercept) - floor(i slope + intercept).
std::shared_ptr<const SymbolSource> mechanical_word(double slope, double intercept);

struct CirclePoint {
  double x = 0.0;
  bool operator==(const CirclePoint&) const = default;
};

struct TorusPoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const TorusPoint&) const = default;
};

struct SymbolPoint {
  std::shared_ptr<const SymbolSource> source;
  std::int64_t offset = 0;
  // window + 1 symbols starting at offset; the last one is a lookahead used for
  // distances of images under the shift.
  std::vector<std::uint8_t> symbols;

  std::span<const std::uint8_t> window() const {
    return std::span<const std::uint8_t>(symbols).first(symbols.size() - 1);
  }
  bool operator==(const SymbolPoint& o) const { return symbols == o.symbols; }
};

SymbolPoint make_symbol_point(std::shared_ptr<const SymbolSource> source, std::int64_t offset, int window);

using BasePoint = std::variant<CirclePoint, TorusPoint, SymbolPoint>;

// Point of a special flow in canonical form: 0 <= height < roof(base).
struct FiberPoint {
  BasePoint base;
  double height = 0.0;
  bool operator==(const FiberPoint&) const = default;
};

using PhasePoint = std::variant<CirclePoint, TorusPoint, SymbolPoint, FiberPoint>;

BasePoint to_base(const PhasePoint& p);
PhasePoint to_phase(const BasePoint& b);

std::string to_string(const PhasePoint& p);

// Wraps into [0,1); values within 1e-12 of 1 wrap to 0.
double reduce_unit(double x);

}  // namespace fk
