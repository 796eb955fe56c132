#include "fk/system_spec.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "fk/errors.hpp"

namespace fk {

double Profile::operator()(double u) const {
  if (a == 0.0) return c;
  return c + a * std::cos(2.0 * std::numbers::pi * u);
}

std::string Profile::to_string() const {
  if (is_constant()) return fmt::format("const:{}", c);
  return fmt::format("cos:c={},a={}", c, a);
}

SystemSpec SystemSpec::rotation(double alpha) {
  SystemSpec s;
  s.kind = Kind::Rotation;
  s.alpha = alpha;
  return s;
}

SystemSpec SystemSpec::torus(double alpha1, double alpha2) {
  SystemSpec s;
  s.kind = Kind::Torus;
  s.alpha = alpha1;
  s.alpha2 = alpha2;
  return s;
}

SystemSpec SystemSpec::full_shift(int arity, int window) {
  SystemSpec s;
  s.kind = Kind::FullShift;
  s.arity = arity;
  s.window = window;
  return s;
}

SystemSpec SystemSpec::sturmian(double slope, int window) {
  SystemSpec s;
  s.kind = Kind::Sturmian;
  s.slope = slope;
  s.window = window;
  return s;
}

SystemSpec SystemSpec::suspension(SystemSpec base) {
  SystemSpec s;
  s.kind = Kind::Suspension;
  s.roof = Profile::constant(1.0);
  s.inner = std::make_shared<const SystemSpec>(std::move(base));
  return s;
}

SystemSpec SystemSpec::special(SystemSpec base, Profile roof) {
  SystemSpec s;
  s.kind = Kind::Special;
  s.roof = roof;
  s.inner = std::make_shared<const SystemSpec>(std::move(base));
  return s;
}

SystemSpec SystemSpec::time_change(SystemSpec flow, Profile rate) {
  SystemSpec s;
  s.kind = Kind::TimeChange;
  s.rate = rate;
  s.inner = std::make_shared<const SystemSpec>(std::move(flow));
  return s;
}

std::string SystemSpec::to_string() const {
  switch (kind) {
    case Kind::Rotation:
      return fmt::format("rotation:alpha={}", alpha);
    case Kind::Torus:
      return fmt::format("torus:alpha1={},alpha2={}", alpha, alpha2);
    case Kind::FullShift:
      return fmt::format("shift:arity={},window={}", arity, window);
    case Kind::Sturmian:
      return fmt::format("sturmian:slope={},window={}", slope, window);
    case Kind::Suspension:
      return fmt::format("suspend({})", inner->to_string());
    case Kind::Special:
      return fmt::format("special({};roof={})", inner->to_string(), roof.to_string());
    case Kind::TimeChange:
      return fmt::format("timechange({};rate={})", inner->to_string(), rate.to_string());
  }
  return {};
}

namespace {

class SpecParser {
 public:
  explicit SpecParser(std::string_view text) : text_(text) {}

  SystemSpec parse_spec_only() {
    SystemSpec s = parse_spec();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return s;
  }

  Profile parse_profile_only() {
    Profile p = parse_profile();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(what, 1, static_cast<int>(pos_) + 1);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!accept(token)) fail(fmt::format("expected '{}'", token));
  }

  std::string_view identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (start == pos_) fail("expected identifier");
    return text_.substr(start, pos_ - start);
  }

  double real() {
    skip_ws();
    if (accept("golden")) return kGoldenMean;
    if (accept("silver")) return std::numbers::sqrt2 - 1.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("expected a real number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  int integer() {
    skip_ws();
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    int value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("expected an integer");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  Profile parse_profile() {
    if (accept("const:")) return Profile::constant(real());
    if (accept("cos:")) {
      Profile p;
      expect("c=");
      p.c = real();
      expect(",");
      expect("a=");
      p.a = real();
      return p;
    }
    fail("expected profile 'const:<c>' or 'cos:c=<c>,a=<a>'");
  }

  SystemSpec parse_spec() {
    const std::size_t name_pos = (skip_ws(), pos_);
    const std::string_view name = identifier();
    if (name == "suspend") {
      expect("(");
      SystemSpec base = parse_spec();
      expect(")");
      return SystemSpec::suspension(std::move(base));
    }
    if (name == "special") {
      expect("(");
      SystemSpec base = parse_spec();
      expect(";");
      expect("roof=");
      Profile roof = parse_profile();
      expect(")");
      return SystemSpec::special(std::move(base), roof);
    }
    if (name == "timechange") {
      expect("(");
      SystemSpec flow = parse_spec();
      expect(";");
      expect("rate=");
      Profile rate = parse_profile();
      expect(")");
      return SystemSpec::time_change(std::move(flow), rate);
    }
    expect(":");
    if (name == "rotation") {
      expect("alpha=");
      return SystemSpec::rotation(real());
    }
    if (name == "torus") {
      expect("alpha1=");
      const double a1 = real();
      expect(",");
      expect("alpha2=");
      return SystemSpec::torus(a1, real());
    }
    if (name == "shift") {
      SystemSpec s = SystemSpec::full_shift(2, 32);
      parse_int_params(s);
      return s;
    }
    if (name == "sturmian") {
      expect("slope=");
      SystemSpec s = SystemSpec::sturmian(real(), 32);
      if (accept(",")) {
        expect("window=");
        s.window = integer();
      }
      return s;
    }
    pos_ = name_pos;
    fail(fmt::format("unknown system kind '{}'", name));
  }

  void parse_int_params(SystemSpec& s) {
    do {
      const std::string_view key = identifier();
      expect("=");
      if (key == "arity")
        s.arity = integer();
      else if (key == "window")
        s.window = integer();
      else
        fail(fmt::format("unknown shift parameter '{}'", key));
    } while (accept(","));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

SystemSpec parse_system_spec(std::string_view text) { return SpecParser(text).parse_spec_only(); }

Profile parse_profile(std::string_view text) { return SpecParser(text).parse_profile_only(); }

}  // namespace fk
