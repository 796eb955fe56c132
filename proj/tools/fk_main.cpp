#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fk/errors.hpp"
#include "fk/experiments.hpp"
#include "fk/parallel.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fk::IoError(fmt::format("cannot read config file '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int fail(const std::string& what, fk::ExitCode code) {
  std::fprintf(stderr, "fk: %s\n", what.c_str());
  return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feldman-Katok distances for maps and flows: reproducible experiments", "fk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fk::kToolVersion);

  int jobs = 0;
  std::string config_path;
  std::string format;
  std::string output;
  app.add_option("--jobs", jobs, "worker threads (default: FK_JOBS, else hardware concurrency)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "file of 'key = value' lines mirroring the flags");
  app.add_option("--format", format, "csv | json (default csv)")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--output", output, "output path, '-' for stdout (default)");

  std::map<std::string, std::map<std::string, std::string>> flag_values;
  for (const auto& spec : fk::experiment_specs()) {
    std::string footer = "CSV columns: ";
    for (std::size_t k = 0; k < spec.columns.size(); ++k) footer += (k ? "," : "") + spec.columns[k];
    auto* sub = app.add_subcommand(spec.name, spec.description);
    sub->fallthrough();
    sub->footer(footer);
    auto& values = flag_values[spec.name];
    for (const auto& o : spec.options) {
      std::string help = o.help;
      if (!o.default_value) help += " (required)";
      else if (!o.default_value->empty()) help += fmt::format(" (default {})", *o.default_value);
      sub->add_option_function<std::string>(
          "--" + o.key, [&values, key = o.key](const std::string& v) { values[key] = v; }, help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(fk::ExitCode::Parse);
  }

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    std::map<std::string, std::string> values;
    if (!config_path.empty()) {
      std::map<std::string, std::string> file;
      try {
        file = fk::parse_config_text(read_file(config_path));
      } catch (const fk::ConfigError& e) {
        throw fk::ConfigError(config_path, e.what());
      }
      for (auto& [k, v] : file) {
        if (k == "jobs") {
          if (jobs == 0) {
            try {
              jobs = std::stoi(v);
            } catch (...) {
              throw fk::ConfigError("jobs", fmt::format("expected a positive integer, got '{}'", v));
            }
          }
        } else if (k == "format") {
          if (format.empty()) format = v;
        } else if (k == "output") {
          if (output.empty()) output = v;
        } else {
          values[k] = v;
        }
      }
    }
    for (const auto& [k, v] : flag_values[experiment]) values[k] = v;
    if (jobs < 0) throw fk::ConfigError("jobs", "must be positive");
    if (jobs > 0) fk::set_jobs(jobs);
    if (format.empty()) format = "csv";
    if (format != "csv" && format != "json")
      throw fk::ConfigError("format", fmt::format("expected csv or json, got '{}'", format));

    const auto start = std::chrono::steady_clock::now();
    const fk::RunReport report = fk::run(fk::ExperimentConfig(experiment, values));
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    fk::emit(report, output, format);
    std::fprintf(stderr, "fk: %s: %zu rows in %.3f s", experiment.c_str(), report.rows.size(), wall);
    for (const auto& v : report.verdicts) std::fprintf(stderr, ", %s %s", v.name.c_str(), v.pass ? "pass" : "FAIL");
    std::fprintf(stderr, "\n");
    return static_cast<int>(report.passed() ? fk::ExitCode::Pass : fk::ExitCode::PropertyFailed);
  } catch (const fk::Error& e) {
    return fail(e.what(), e.exit_code());
  } catch (const std::exception& e) {
    return fail(fmt::format("internal error: {}", e.what()), fk::ExitCode::PropertyFailed);
  }
}
