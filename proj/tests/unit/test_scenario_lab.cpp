#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "volbound/errors.hpp"
#include "volbound/scenario_lab.hpp"

using namespace volbound;
using namespace volbound::lab;

namespace {

std::string config_path(const std::string& name) {
  const char* dir = std::getenv("VOLBOUND_CONFIG_DIR");
  return std::string(dir ? dir : "configs") + "/" + name;
}

std::string error_of(const std::string& text, const std::vector<std::string>& ov = {}) {
  try {
    parse_config(text, ov);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

RunConfig quick(const std::string& command, const std::string& text) {
  RunConfig rc;
  rc.command = command;
  rc.config_text = text;
  return rc;
}

}  // namespace

TEST_CASE("minimal gbm config parses to a self-consistent scenario") {
  RunConfig rc;
  std::ifstream in(config_path("minimal_gbm.yaml"));
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  const LabConfig c = parse_config(ss.str());
  CHECK(c.scenario.reference.kind == ModelKind::gbm);
  CHECK(c.scenario.generator == Generator::self_consistent);
  CHECK(c.scenario.sigma == 0.2);
  CHECK(c.maturities->q() == 3);
  CHECK(c.weights->weights() == std::vector<double>{1.0});
  CHECK(c.values["sim.seed"] == 1);
}

TEST_CASE("parse errors name the key and line") {
  const std::string unknown = "model:\n  name: gbm\nscenario:\n  sigma: 0.2\n  sigmaa: 0.3\n";
  const std::string e1 = error_of(unknown);
  CHECK(contains(e1, "scenario.sigmaa"));
  CHECK(contains(e1, "line 5"));

  const std::string strikes = "grid:\n  strikes: [0.1, 1, 2]\n";
  const std::string e2 = error_of(strikes);
  CHECK(contains(e2, "grid.strikes"));
  CHECK(contains(e2, "line 2"));
  CHECK(contains(e2, "StrikeGrid"));

  const std::string e3 = error_of("grid:\n  maturities: [1, 2]\n");
  CHECK(contains(e3, "q >= 3"));

  CHECK(contains(error_of("sim:\n  paths: -4\n"), "non-negative integer"));
  CHECK(contains(error_of("model:\n  name: heston\n"), "unknown model"));
  CHECK(contains(error_of("scenario:\n  generator: jumpy\n"), "scenario.generator"));
  CHECK(contains(error_of("grid:\n  weights: [1, 2]\n"), "expected 1 weights"));
  CHECK(contains(error_of("model: [1, 2\n"), "syntax error"));
  CHECK(contains(error_of("model:\n  name: logdiff\n  z0: 1.5\n"), "model.z0"));
}

TEST_CASE("overrides replace file values and are validated") {
  const LabConfig c = parse_config("scenario:\n  sigma: 0.2\n", {"scenario.sigma=0.35", "grid.strikes=[0, 1, 2]"});
  CHECK(c.scenario.sigma == 0.35);
  CHECK(c.strikes->m() == 2);
  CHECK(c.lines.at("scenario.sigma") == -1);
  CHECK(contains(error_of("", {"scenario.nope=1"}), "override"));
  CHECK(contains(error_of("", {"scenario.sigma"}), "key=value"));
  CHECK(contains(error_of("", {"sim.dt=abc"}), "expected a number"));
}

TEST_CASE("the resolved config is itself a valid config") {
  const LabConfig a = parse_config("scenario:\n  generator: step-vol\n  jump_size: 0.2\n");
  const LabConfig b = parse_config(a.values.dump());
  CHECK(a.values == b.values);
}

TEST_CASE("validate-phi exits 0 and reports every model") {
  const RunOutcome out = run(quick("validate-phi", ""));
  CHECK(out.exit_code == kExitOk);
  CHECK(out.report["result"]["models"].size() == 3);
  CHECK(out.report["verdict"] == "pass");
}

TEST_CASE("exit codes") {
  CHECK(run(quick("frobnicate", "")).exit_code == kExitConfig);
  CHECK(run(quick("check-bound", "grid:\n  maturities: [1, 2]\n")).exit_code == kExitConfig);
  RunConfig missing = quick("price", "");
  missing.scenario_file = "/nonexistent/volbound.yaml";
  CHECK(run(missing).exit_code == kExitIo);
  RunConfig unwritable = quick("validate-phi", "");
  unwritable.out_path = "/nonexistent/dir/report.json";
  CHECK(run(unwritable).exit_code == kExitIo);
  CHECK(run(quick("implied-vol", "")).exit_code == kExitConfig);
  CHECK(run(quick("implied-vol", "price:\n  market_price: 2.0\n")).exit_code == kExitConfig);
}

TEST_CASE("price and implied-vol round trip through the lab") {
  const RunOutcome p = run(quick("price", "price:\n  K: 1.1\n  T: 2\n  method: all\nsim:\n  paths: 4000\n"));
  CHECK(p.exit_code == kExitOk);
  const double closed = p.report["result"]["closed"]["value"].get<double>();
  CHECK(std::abs(p.report["result"]["quad"]["value"].get<double>() - closed) < 1e-9);
  std::ostringstream text;
  text.precision(17);
  text << "price:\n  K: 1.1\n  T: 2\n  market_price: " << closed << "\n";
  const RunOutcome iv = run(quick("implied-vol", text.str()));
  CHECK(iv.exit_code == kExitOk);
  CHECK(iv.report["result"]["sigma"].get<double>() == doctest::Approx(0.2).epsilon(1e-10));
}

TEST_CASE("check-bound reports are reproducible across worker counts") {
  const std::string text =
      "scenario:\n  generator: meanrev-vol\n  vol_of_vol: 0.2\nsim:\n  paths: 2000\n  dt: 0.05\n"
      "  l_diagnostic_paths: 3\n";
  RunConfig rc = quick("check-bound", text);
  rc.workers = 1;
  RunOutcome a = run(rc);
  rc.workers = 5;
  RunOutcome b = run(rc);
  REQUIRE(a.exit_code == kExitOk);
  CHECK(a.report["digest"] == b.report["digest"]);
  a.report.erase("runtime");
  b.report.erase("runtime");
  CHECK(a.report.dump() == b.report.dump());
  CHECK(report_digest(a.report) == a.report["digest"].get<std::string>());
}

TEST_CASE("seed is recorded verbatim and changes the result") {
  RunConfig rc = quick("check-bound", "sim:\n  paths: 1000\n  l_diagnostic_paths: 0\nscenario:\n  generator: meanrev-vol\n  vol_of_vol: 0.3\n");
  rc.seed = 18446744073709551615ULL;
  const RunOutcome a = run(rc);
  CHECK(a.report["seed"].get<std::uint64_t>() == 18446744073709551615ULL);
  rc.seed = 5;
  const RunOutcome b = run(rc);
  CHECK(a.report["result"]["lhs"] != b.report["result"]["lhs"]);
}

TEST_CASE("scan writes one CSV row per parameter point") {
  const std::string text =
      "scenario:\n  generator: step-vol\n  jump_time: 0.75\nsim:\n  paths: 3000\n  dt: 0.05\n"
      "  l_diagnostic_paths: 0\nscan:\n  axes:\n    - key: scenario.jump_size\n      values: [0, 0.25, 0.5]\n";
  RunConfig rc = quick("scan", text);
  rc.format = Format::csv;
  const auto path = std::filesystem::temp_directory_path() / "volbound_scan_test.csv";
  rc.out_path = path.string();
  const RunOutcome out = run(rc);
  CHECK(out.exit_code == kExitOk);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "scenario.jump_size,lhs,lhs_se,rhs,max_abs_z,residuals_consistent,satisfied,"
                  "impossible_conjunction,pass");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);
  const auto& r = out.report["result"]["rows"];
  CHECK(r[0]["pass"] == true);
  CHECK(r[2]["max_abs_z"].get<double>() >= r[0]["max_abs_z"].get<double>());
  std::filesystem::remove(path);
}

TEST_CASE("scan with a single-point axis matches check-bound") {
  const std::string base = "sim:\n  paths: 1500\n  l_diagnostic_paths: 0\n";
  const RunOutcome single =
      run(quick("scan", base + "scan:\n  axes:\n    - key: scenario.sigma\n      values: [0.2]\n"));
  const RunOutcome cb = run(quick("check-bound", base));
  CHECK(single.report["result"]["rows"][0]["lhs"] == cb.report["result"]["lhs"]);
  CHECK(single.report["result"]["rows"][0]["rhs"] == cb.report["result"]["rhs"]["value"]);
  CHECK(run(quick("scan", base)).exit_code == kExitConfig);
}

TEST_CASE("densify and martingale-check") {
  const RunOutcome d = run(quick("densify", ""));
  CHECK(d.exit_code == kExitOk);
  CHECK(d.report["result"]["rows"].size() == 4);
  const RunOutcome bad = run(quick("densify", "densify:\n  exponent: 1.0\n"));
  CHECK(bad.exit_code == kExitFailed);
  const RunOutcome m = run(quick("martingale-check", "sim:\n  paths: 4000\n"));
  CHECK(m.exit_code == kExitOk);
  CHECK(m.report["result"]["checks"].size() == 2);
}

TEST_CASE("CSV rendering flattens non-sweep reports") {
  RunConfig rc = quick("validate-phi", "phi:\n  models: [gbm]\n");
  rc.format = Format::csv;
  const RunOutcome out = run(rc);
  CHECK(out.rendered.rfind("key,value\n", 0) == 0);
  CHECK(contains(out.rendered, "result/models/0/passed,true"));
}
