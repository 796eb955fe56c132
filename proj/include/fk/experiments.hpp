#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fk/report.hpp"

namespace fk {

struct OptionSpec {
  std::string key;
  std::string help;
  std::optional<std::string> default_value;  // none: required
};

struct ExperimentSpec {
  std::string name;
  std::string description;
  std::vector<std::string> columns;
  std::vector<OptionSpec> options;
};

const std::vector<ExperimentSpec>& experiment_specs();
const ExperimentSpec& experiment_spec(std::string_view name);

// Experiment name plus raw option values. Typed getters fall back to the
// declared defaults and record every value they hand out, so the report
// echoes the full effective configuration.
class ExperimentConfig {
 public:
  ExperimentConfig() = default;
  ExperimentConfig(std::string experiment, std::map<std::string, std::string> values);

  const std::string& experiment() const { return experiment_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key) const;
  std::optional<std::string> maybe(const std::string& key) const;
  double real(const std::string& key) const;
  long integer(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  const std::map<std::string, std::string>& used() const { return used_; }

 private:
  std::optional<std::string> lookup(const std::string& key) const;

  std::string experiment_;
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> used_;
};

// Line-oriented `key = value` text; `#` starts a comment. Errors carry line
// and column.
std::map<std::string, std::string> parse_config_text(std::string_view text);

// Point sets: `random:<count>,seed=<int>` or explicit points separated by ';'.
struct PointSpec {
  bool random = false;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> explicit_points;
};

PointSpec parse_point_spec(std::string_view text, std::string_view field);

RunReport run(const ExperimentConfig& config);

}  // namespace fk
