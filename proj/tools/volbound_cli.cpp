#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "volbound/scenario_lab.hpp"

namespace lab = volbound::lab;

namespace {

const char* describe(const std::string& name) {
  if (name == "validate-phi") return "Check phi against its ODE, positivity and convexity";
  if (name == "price") return "Call price by closed form, quadrature and/or Monte Carlo";
  if (name == "implied-vol") return "Invert a market price to the model's sigma";
  if (name == "check-bound") return "Monte-Carlo test of the calibration inequality";
  if (name == "scan") return "check-bound over a grid of scenario parameters";
  if (name == "densify") return "Strike-grid densification study";
  if (name == "martingale-check") return "Martingale tests for U, V, the integral and the semigroup";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volbound: implied-volatility bounds against reference diffusion models"};
  app.require_subcommand(1, 1);

  lab::RunConfig rc;
  std::string format = "json";
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double dt = 0.0;

  for (const auto& name : lab::commands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("--config", rc.scenario_file, "Scenario configuration file (YAML)");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--paths", paths, "Number of Monte-Carlo paths");
    sub->add_option("--dt", dt, "Maximum simulation step");
    sub->add_option("--out", rc.out_path, "Write the report to this path instead of stdout");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--set", rc.overrides, "Override a config key: key=value (repeatable)");
    sub->callback([&, sub, name] {
      rc.command = name;
      if (sub->count("--seed")) rc.seed = seed;
      if (sub->count("--paths")) rc.paths = paths;
      if (sub->count("--dt")) rc.dt = dt;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? lab::kExitOk : lab::kExitConfig;
  }
  rc.format = format == "csv" ? lab::Format::csv : lab::Format::json;

  const lab::RunOutcome out = lab::run(rc);
  if (!out.error.empty()) {
    std::cerr << "volbound " << rc.command << ": " << out.error << '\n';
    return out.exit_code;
  }
  if (rc.out_path.empty()) std::cout << out.rendered;
  return out.exit_code;
}
