#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "volbound/bound_engine.hpp"
#include "volbound/phi_engine.hpp"
#include "volbound/reference_models.hpp"

namespace volbound::lab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailed = 1, kExitConfig = 2, kExitIo = 3 };

struct PriceSpec {
  double t = 0.0;
  double T = 1.0;
  double K = 1.0;
  std::optional<double> z;
  std::optional<double> market_price;
  std::string method = "closed";  // closed | quad | mc | all
};

struct ScanAxis {
  std::string key;
  std::vector<double> values;
};

// A fully validated scenario configuration. `values` holds every key with
// defaults filled in, flat and dotted, and is itself a valid config document.
struct LabConfig {
  Json values;
  std::map<std::string, int> lines;  // key -> source line (0: default or override)

  Scenario scenario;
  std::optional<MaturityGrid> maturities;
  std::optional<StrikeGrid> strikes;
  std::optional<WeightVector> weights;
  double t = 0.5;
  std::vector<double> residual_times;
  SimConfig sim;
  std::size_t l_diagnostic_paths = 200;

  PriceSpec price;

  std::vector<double> martingale_times;
  std::string martingale_process = "uv";

  std::vector<std::string> phi_models;
  std::size_t phi_points = 200;
  std::optional<double> phi_lo;
  std::optional<double> phi_hi;
  std::optional<double> phi_tol;

  std::vector<ScanAxis> scan_axes;

  std::vector<std::size_t> densify_ns;
  double densify_exponent = 0.25;
  bool densify_lhs = false;
};

// Parses YAML text and applies `key=value` overrides. Throws ConfigError
// naming the key and the line on unknown keys, bad types and violated
// invariants.
LabConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});

// Rebuilds the typed config from a flat resolved document.
LabConfig config_from_values(const Json& values, const std::map<std::string, int>& lines = {});

std::vector<std::string> known_keys();

enum class Format { json, csv };

Format format_from_string(const std::string& name);

struct RunConfig {
  std::string command;
  std::string scenario_file;  // empty: `config_text` (or defaults)
  std::string config_text;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<double> dt;
  std::optional<unsigned> workers;  // default: VOLBOUND_WORKERS or CPU count
  std::string out_path;
  Format format = Format::json;
};

struct RunOutcome {
  int exit_code = kExitOk;
  Json report;
  std::string rendered;  // report in the requested format
  std::string error;
};

std::vector<std::string> commands();

// Runs one subcommand. Never throws: errors map to exit codes. When
// out_path is set the rendered report is written there.
RunOutcome run(const RunConfig& cfg);

// Hex digest of the report with its "runtime" section removed.
std::string report_digest(const Json& report);

// Flat CSV rendering; scan results become one row per parameter point.
std::string to_csv(const Json& report);

Json to_json(const OdeResidualReport& r);
Json to_json(const MartingaleTestReport& r);
Json to_json(const ResidualTable& r);
Json to_json(const BoundReport& r);
Json to_json(const DensifyReport& r);

}  // namespace volbound::lab
