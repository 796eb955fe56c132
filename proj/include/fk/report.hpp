#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace fk {

inline constexpr const char* kToolVersion = "0.1.0";

using Value = std::variant<std::int64_t, double, std::string, bool>;

// Rounds to 12 significant digits, the precision of every emitted number.
double round12(double v);

struct Verdict {
  std::string name;
  bool pass = true;
  std::string detail;

  bool operator==(const Verdict&) const = default;
};

// Output of one experiment. Doubles are rounded on insertion, so CSV and
// JSON carry the same values and reruns are byte-identical.
struct RunReport {
  std::string experiment;
  std::map<std::string, std::string> config;  // every option value used, defaults included
  std::string tool_version = kToolVersion;
  std::vector<std::string> columns;
  std::vector<std::vector<Value>> rows;
  std::vector<Verdict> verdicts;
  nlohmann::json details = nlohmann::json::object();

  void add_row(std::vector<Value> row);
  void add_verdict(std::string name, bool pass, std::string detail = {});
  bool passed() const;

  bool operator==(const RunReport&) const = default;
};

std::string to_csv(const RunReport& r);
nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

// Writes CSV or JSON ("csv" | "json") to path, or to stdout for "-".
// Throws IoError when the file cannot be written.
void emit(const RunReport& r, const std::string& path, const std::string& format);

}  // namespace fk
