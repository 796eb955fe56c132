#include "fk/report.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "fk/errors.hpp"

namespace fk {

double round12(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  return std::stod(fmt::format("{:.12g}", v));
}

namespace {

Value rounded(Value v) {
  if (auto d = std::get_if<double>(&v)) *d = round12(*d);
  return v;
}

std::string csv_field(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          return fmt::format("{:.12g}", x);
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (x.find_first_of(",\"\n") == std::string::npos) return x;
          std::string q = "\"";
          for (char c : x) q += c == '"' ? std::string("\"\"") : std::string(1, c);
          return q + "\"";
        } else {
          return std::to_string(x);
        }
      },
      v);
}

nlohmann::json value_json(const Value& v) {
  return std::visit([](const auto& x) { return nlohmann::json(x); }, v);
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw std::invalid_argument("report cell must be a number, string or boolean");
}

}  // namespace

void RunReport::add_row(std::vector<Value> row) {
  if (row.size() != columns.size())
    throw std::logic_error(fmt::format("row has {} fields, header has {}", row.size(), columns.size()));
  for (auto& v : row) v = rounded(std::move(v));
  rows.push_back(std::move(row));
}

void RunReport::add_verdict(std::string name, bool pass, std::string detail) {
  verdicts.push_back({std::move(name), pass, std::move(detail)});
}

bool RunReport::passed() const {
  for (const auto& v : verdicts)
    if (!v.pass) return false;
  return true;
}

std::string to_csv(const RunReport& r) {
  std::string out;
  for (std::size_t k = 0; k < r.columns.size(); ++k) out += (k ? "," : "") + r.columns[k];
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out += (k ? "," : "") + csv_field(row[k]);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& v : row) jr.push_back(value_json(v));
    rows.push_back(std::move(jr));
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts) verdicts.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  return {{"experiment", r.experiment},
          {"metadata", {{"config", r.config}, {"tool_version", r.tool_version}}},
          {"columns", r.columns},
          {"rows", std::move(rows)},
          {"verdicts", std::move(verdicts)},
          {"pass", r.passed()},
          {"details", r.details}};
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config = j.at("metadata").at("config").get<std::map<std::string, std::string>>();
  r.tool_version = j.at("metadata").at("tool_version").get<std::string>();
  r.columns = j.at("columns").get<std::vector<std::string>>();
  for (const auto& jr : j.at("rows")) {
    std::vector<Value> row;
    for (const auto& v : jr) row.push_back(value_from_json(v));
    r.rows.push_back(std::move(row));
  }
  for (const auto& v : j.at("verdicts"))
    r.verdicts.push_back({v.at("name").get<std::string>(), v.at("pass").get<bool>(), v.at("detail").get<std::string>()});
  r.details = j.at("details");
  return r;
}

void emit(const RunReport& r, const std::string& path, const std::string& format) {
  std::string text;
  if (format == "csv")
    text = to_csv(r);
  else if (format == "json")
    text = to_json(r).dump(2) + "\n";
  else
    throw ConfigError("format", fmt::format("expected csv or json, got '{}'", format));
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  out << text;
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path));
}

}  // namespace fk
