#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fk/errors.hpp"
#include "fk/experiments.hpp"
#include "fk/report.hpp"

using namespace fk;

namespace {

RunReport sample_report() {
  RunReport r;
  r.experiment = "demo";
  r.config = {{"delta", "0.05"}, {"system", "rotation:alpha=0.5"}};
  r.columns = {"i", "x", "value", "ok"};
  r.add_row({std::int64_t{0}, std::string("0.1,0.2"), 1.0 / 3.0, true});
  r.add_row({std::int64_t{1}, std::string("say \"hi\""), 2.5e-13, false});
  r.add_verdict("bound", true, "all good");
  r.details["note"] = "n";
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("csv output") {
  const std::string csv = to_csv(sample_report());
  CHECK(csv == "i,x,value,ok\n0,\"0.1,0.2\",0.333333333333,true\n1,\"say \"\"hi\"\"\",2.5e-13,false\n");
}

TEST_CASE("json round trip") {
  const RunReport r = sample_report();
  const RunReport back = report_from_json(nlohmann::json::parse(to_json(r).dump(2)));
  CHECK(back == r);
  CHECK(to_json(r).at("metadata").at("tool_version") == kToolVersion);
}

TEST_CASE("empty report is a header-only file") {
  RunReport r;
  r.experiment = "empty";
  r.columns = {"a", "b"};
  r.add_verdict("trivial", true);
  const std::string path = "fk_empty_report.csv";
  emit(r, path, "csv");
  CHECK(slurp(path) == "a,b\n");
  std::remove(path.c_str());
  CHECK(r.passed());
}

TEST_CASE("emit errors") {
  CHECK_THROWS_AS(emit(sample_report(), "/nonexistent/dir/out.csv", "csv"), IoError);
  CHECK_THROWS_AS(emit(sample_report(), "-", "xml"), ConfigError);
  RunReport r = sample_report();
  CHECK_THROWS_AS(r.add_row({std::int64_t{1}}), std::logic_error);
}

TEST_CASE("config text parsing") {
  const auto m = parse_config_text("# comment\nsystem = rotation:alpha=0.5\n\n  delta=0.05  # trailing\nhorizons = 1,2\n");
  CHECK(m.at("system") == "rotation:alpha=0.5");
  CHECK(m.at("delta") == "0.05");
  CHECK(m.at("horizons") == "1,2");

  auto where = [](const char* text) {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return std::make_pair(e.line(), e.column());
    }
    return std::make_pair(0, 0);
  };
  CHECK(where("a = 1\nnovalue\n") == std::make_pair(2, 1));
  CHECK(where("a = 1\n  B = 2\n") == std::make_pair(2, 3));
  CHECK(where("a = 1\na = 2\n") == std::make_pair(2, 1));
  CHECK(where("a =\n") == std::make_pair(1, 4));
  CHECK(where(" = 3\n") == std::make_pair(1, 2));
}

TEST_CASE("point specs") {
  const PointSpec r = parse_point_spec("random:5,seed=9", "x");
  CHECK(r.random);
  CHECK(r.count == 5);
  CHECK(r.seed == 9);
  const PointSpec e = parse_point_spec("0.1;0.2@0.5", "x");
  CHECK_FALSE(e.random);
  CHECK(e.explicit_points == std::vector<std::string>{"0.1", "0.2@0.5"});
  CHECK_THROWS_AS(parse_point_spec("random:5", "x"), ConfigError);
  CHECK_THROWS_AS(parse_point_spec("random:0,seed=1", "x"), ConfigError);
  CHECK_THROWS_AS(parse_point_spec("", "x"), ConfigError);
}

TEST_CASE("experiment table") {
  CHECK(experiment_specs().size() == 13);
  const auto& fm = experiment_spec("fk-matrix");
  std::string header;
  for (const auto& c : fm.columns) header += (header.empty() ? "" : ",") + c;
  CHECK(header == "i,j,x_i,y_j,rho_fk_flow,tol,horizon_max");
  CHECK_THROWS_AS(experiment_spec("nope"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig("fbar", {{"bogus", "1"}}), ConfigError);
}

TEST_CASE("run echoes defaults and is deterministic") {
  const ExperimentConfig c("ftilde", {{"system", "suspend(rotation:alpha=0.6180339887)"},
                                      {"x", "0.1@0.2"},
                                      {"y", "0.5@0.7"},
                                      {"delta", "0.05"},
                                      {"horizons", "10,20,30,40"}});
  const RunReport a = run(c);
  const RunReport b = run(ExperimentConfig(c.experiment(), c.values()));
  CHECK(to_csv(a) == to_csv(b));
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.config.at("step") == "0.05");
  CHECK(a.config.at("tol") == "0.0078125");
  CHECK(a.rows.size() == 4);
}

TEST_CASE("run errors map to the error taxonomy") {
  CHECK_THROWS_AS(run(ExperimentConfig("fbar", {{"system", "rotation:alpha=0.5"}})), ConfigError);
  CHECK_THROWS_AS(run(ExperimentConfig("fbar", {{"system", "rotation:alpha=0.5"},
                                                {"x", "0"},
                                                {"y", "0.5"},
                                                {"delta", "abc"},
                                                {"horizons", "10,20"}})),
                  ConfigError);
  CHECK_THROWS_AS(run(ExperimentConfig("prokhorov", {{"system", "suspend(rotation:alpha=0.5)"},
                                                     {"pairs", "random:1,seed=1"},
                                                     {"t", "400"},
                                                     {"step", "0.05"}})),
                  RefusalError);
}
