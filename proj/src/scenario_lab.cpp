#include "volbound/scenario_lab.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "volbound/errors.hpp"
#include "volbound/parallel.hpp"
#include "volbound/pricing.hpp"

namespace volbound::lab {

namespace {

enum class ValueType { real, u64, str, boolean, real_list, u64_list, str_list, axes };

struct KeySpec {
  std::string key;
  ValueType type;
  Json def;  // null: optional without default
};

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> specs = {
      {"model.name", ValueType::str, "gbm"},
      {"model.z0", ValueType::real, nullptr},
      {"model.h", ValueType::real, 1.0},
      {"model.h_values", ValueType::real_list, Json::array()},
      {"model.h_breaks", ValueType::real_list, Json::array()},
      {"scenario.sigma", ValueType::real, 0.2},
      {"scenario.generator", ValueType::str, "self-consistent"},
      {"scenario.jump_time", ValueType::real, 0.25},
      {"scenario.jump_size", ValueType::real, 0.0},
      {"scenario.kappa", ValueType::real, 1.0},
      {"scenario.theta_bar", ValueType::real, 0.2},
      {"scenario.vol_of_vol", ValueType::real, 0.0},
      {"scenario.rho", ValueType::real, 0.0},
      {"grid.maturities", ValueType::real_list, Json::array({1.0, 2.0, 3.0})},
      {"grid.strikes", ValueType::real_list, Json::array({0.0, 0.5, 1.0, 1.5, 2.0})},
      {"grid.weights", ValueType::real_list, Json::array()},
      {"grid.t", ValueType::real, 0.5},
      {"grid.residual_times", ValueType::real_list, Json::array()},
      {"sim.paths", ValueType::u64, 10000},
      {"sim.dt", ValueType::real, 0.01},
      {"sim.seed", ValueType::u64, 1},
      {"sim.scheme", ValueType::str, "euler-maruyama"},
      {"sim.inner_paths", ValueType::u64, 256},
      {"sim.l_diagnostic_paths", ValueType::u64, 200},
      {"price.t", ValueType::real, 0.0},
      {"price.T", ValueType::real, 1.0},
      {"price.K", ValueType::real, 1.0},
      {"price.z", ValueType::real, nullptr},
      {"price.market_price", ValueType::real, nullptr},
      {"price.method", ValueType::str, "closed"},
      {"martingale.times", ValueType::real_list, Json::array({0.25, 0.5, 1.0})},
      {"martingale.process", ValueType::str, "uv"},
      {"phi.models", ValueType::str_list, Json::array({"gbm", "bessel0", "logdiff"})},
      {"phi.points", ValueType::u64, 200},
      {"phi.lo", ValueType::real, nullptr},
      {"phi.hi", ValueType::real, nullptr},
      {"phi.tol", ValueType::real, nullptr},
      {"scan.axes", ValueType::axes, Json::array()},
      {"densify.ns", ValueType::u64_list, Json::array({4, 16, 64, 256})},
      {"densify.exponent", ValueType::real, 0.25},
      {"densify.lhs", ValueType::boolean, false},
  };
  return specs;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : schema()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

bool is_section(const std::string& prefix) {
  const std::string p = prefix + ".";
  return std::any_of(schema().begin(), schema().end(),
                     [&](const KeySpec& s) { return s.key.rfind(p, 0) == 0; });
}

std::string where(const std::string& key, int line) {
  if (line > 0) return "'" + key + "' (line " + std::to_string(line) + ")";
  if (line < 0) return "'" + key + "' (override)";
  return "'" + key + "'";
}

int line_of(const YAML::Node& node) { return node.Mark().line + 1; }

double to_real(const YAML::Node& n, const std::string& key, int line) {
  if (!n.IsScalar()) throw ConfigError(where(key, line) + ": expected a number");
  double v = 0.0;
  try {
    v = n.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(key, line) + ": expected a number, got '" + n.Scalar() + "'");
  }
  if (!std::isfinite(v)) throw ConfigError(where(key, line) + ": value must be finite");
  return v;
}

std::uint64_t to_u64(const YAML::Node& n, const std::string& key, int line) {
  if (!n.IsScalar() || n.Scalar().empty() || n.Scalar().front() == '-') {
    throw ConfigError(where(key, line) + ": expected a non-negative integer");
  }
  try {
    return n.as<std::uint64_t>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(key, line) + ": expected a non-negative integer, got '" + n.Scalar() +
                      "'");
  }
}

Json convert(const YAML::Node& n, const KeySpec& spec, int line) {
  const std::string& key = spec.key;
  if (n.IsNull()) {
    if (spec.def.is_null()) return nullptr;
    throw ConfigError(where(key, line) + ": value required");
  }
  const auto require_seq = [&] {
    if (!n.IsSequence()) throw ConfigError(where(key, line) + ": expected a list");
  };
  switch (spec.type) {
    case ValueType::real: return to_real(n, key, line);
    case ValueType::u64: return to_u64(n, key, line);
    case ValueType::str:
      if (!n.IsScalar()) throw ConfigError(where(key, line) + ": expected a string");
      return n.Scalar();
    case ValueType::boolean:
      try {
        return n.as<bool>();
      } catch (const YAML::Exception&) {
        throw ConfigError(where(key, line) + ": expected true or false");
      }
    case ValueType::real_list: {
      require_seq();
      Json out = Json::array();
      for (const auto& e : n) out.push_back(to_real(e, key, line));
      return out;
    }
    case ValueType::u64_list: {
      require_seq();
      Json out = Json::array();
      for (const auto& e : n) out.push_back(to_u64(e, key, line));
      return out;
    }
    case ValueType::str_list: {
      require_seq();
      Json out = Json::array();
      for (const auto& e : n) {
        if (!e.IsScalar()) throw ConfigError(where(key, line) + ": expected a list of strings");
        out.push_back(e.Scalar());
      }
      return out;
    }
    case ValueType::axes: {
      require_seq();
      Json out = Json::array();
      for (const auto& axis : n) {
        const int aline = line > 0 ? line_of(axis) : line;
        if (!axis.IsMap()) throw ConfigError(where(key, aline) + ": each axis needs key and values");
        Json entry = Json::object();
        for (const auto& kv : axis) {
          const std::string field = kv.first.as<std::string>();
          if (field == "key") {
            entry["key"] = kv.second.as<std::string>();
          } else if (field == "values") {
            if (!kv.second.IsSequence()) throw ConfigError(where(key, aline) + ": values must be a list");
            Json vals = Json::array();
            for (const auto& e : kv.second) vals.push_back(to_real(e, key, aline));
            entry["values"] = vals;
          } else {
            throw ConfigError(where(key + "." + field, aline) + ": unknown key");
          }
        }
        if (!entry.contains("key") || !entry.contains("values")) {
          throw ConfigError(where(key, aline) + ": each axis needs key and values");
        }
        out.push_back(entry);
      }
      return out;
    }
  }
  return nullptr;
}

void walk(const YAML::Node& node, const std::string& prefix, Json& values,
          std::map<std::string, int>& lines) {
  for (const auto& kv : node) {
    const int line = line_of(kv.first);
    if (!kv.first.IsScalar()) throw ConfigError("non-scalar key at line " + std::to_string(line));
    const std::string key = prefix.empty() ? kv.first.Scalar() : prefix + "." + kv.first.Scalar();
    if (const KeySpec* spec = find_spec(key)) {
      values[key] = convert(kv.second, *spec, line);
      lines[key] = line;
    } else if (is_section(key)) {
      if (!kv.second.IsMap()) throw ConfigError(where(key, line) + ": expected a section");
      walk(kv.second, key, values, lines);
    } else {
      throw ConfigError(where(key, line) + ": unknown key");
    }
  }
}

class Reader {
 public:
  Reader(const Json& values, const std::map<std::string, int>& lines)
      : values_(values), lines_(lines) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const auto it = lines_.find(key);
    throw ConfigError(where(key, it == lines_.end() ? 0 : it->second) + ": " + msg);
  }

  const Json& at(const std::string& key) const { return values_.at(key); }
  double real(const std::string& key) const { return at(key).get<double>(); }
  std::optional<double> opt_real(const std::string& key) const {
    if (at(key).is_null()) return std::nullopt;
    return at(key).get<double>();
  }
  std::uint64_t u64(const std::string& key) const { return at(key).get<std::uint64_t>(); }
  std::string str(const std::string& key) const { return at(key).get<std::string>(); }
  std::vector<double> reals(const std::string& key) const {
    return at(key).get<std::vector<double>>();
  }

  // Runs `fn`, rethrowing invariant violations as ConfigError tagged with `key`.
  template <class F>
  auto guard(const std::string& key, F&& fn) const -> decltype(fn()) {
    try {
      return fn();
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      if (msg.rfind("'", 0) == 0) throw;
      fail(key, msg);
    } catch (const DomainError& e) {
      fail(key, e.what());
    }
  }

 private:
  const Json& values_;
  const std::map<std::string, int>& lines_;
};

void require(bool ok, const Reader& r, const std::string& key, const std::string& msg) {
  if (!ok) r.fail(key, msg);
}

}  // namespace

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& s : schema()) out.push_back(s.key);
  return out;
}

LabConfig config_from_values(const Json& values, const std::map<std::string, int>& lines) {
  const Reader r(values, lines);
  LabConfig c;
  c.values = values;
  c.lines = lines;

  ReferenceModel model = r.guard("model.name", [&] { return builtin_model(r.str("model.name")); });
  const auto h_values = r.reals("model.h_values");
  if (!h_values.empty()) {
    model.h = r.guard("model.h_values",
                      [&] { return TimeWeight::piecewise(h_values, r.reals("model.h_breaks")); });
  } else {
    require(r.reals("model.h_breaks").empty(), r, "model.h_breaks", "needs model.h_values");
    model.h = r.guard("model.h", [&] { return TimeWeight::constant(r.real("model.h")); });
  }
  if (const auto z0 = r.opt_real("model.z0")) {
    require(model.beta.in_interior(*z0), r, "model.z0",
            "z0 must lie in the open state domain of '" + model.name + "'");
    model.z0 = *z0;
  }

  Scenario& scn = c.scenario;
  scn.reference = model;
  scn.sigma = r.real("scenario.sigma");
  scn.generator = r.guard("scenario.generator",
                          [&] { return generator_from_string(r.str("scenario.generator")); });
  scn.jump_time = r.real("scenario.jump_time");
  scn.jump_size = r.real("scenario.jump_size");
  scn.kappa = r.real("scenario.kappa");
  scn.theta_bar = r.real("scenario.theta_bar");
  scn.vol_of_vol = r.real("scenario.vol_of_vol");
  scn.rho = r.real("scenario.rho");
  r.guard("scenario", [&] { scn.validate(); });

  c.maturities = r.guard("grid.maturities", [&] { return MaturityGrid(r.reals("grid.maturities")); });
  require(c.maturities->front() > 0.0, r, "grid.maturities", "maturities must be positive");
  c.strikes = r.guard("grid.strikes", [&] { return StrikeGrid(r.reals("grid.strikes")); });
  const auto w = r.reals("grid.weights");
  const std::size_t q = c.maturities->q();
  if (w.empty()) {
    c.weights = WeightVector::unweighted(q);
  } else {
    require(w.size() == q - 2, r, "grid.weights",
            "expected " + std::to_string(q - 2) + " weights (p_3..p_q), got " +
                std::to_string(w.size()));
    c.weights = r.guard("grid.weights", [&] { return WeightVector(w); });
  }
  c.t = r.real("grid.t");
  require(c.t >= 0.0 && c.t <= c.maturities->front(), r, "grid.t", "need 0 <= t <= T_1");
  c.residual_times = r.reals("grid.residual_times");
  for (double rt : c.residual_times) {
    require(rt >= 0.0 && rt <= c.maturities->front(), r, "grid.residual_times",
            "residual times must lie in [0, T_1]");
  }

  c.sim.n_paths = r.u64("sim.paths");
  c.sim.dt = r.real("sim.dt");
  c.sim.seed = r.u64("sim.seed");
  c.sim.scheme = r.guard("sim.scheme", [&] { return scheme_from_string(r.str("sim.scheme")); });
  c.sim.inner_paths = r.u64("sim.inner_paths");
  c.l_diagnostic_paths = r.u64("sim.l_diagnostic_paths");
  require(c.sim.n_paths >= 2, r, "sim.paths", "need at least 2 paths");
  require(c.sim.dt > 0.0, r, "sim.dt", "dt must be positive");
  require(c.sim.inner_paths >= 2, r, "sim.inner_paths", "need at least 2 inner paths");
  r.guard("sim", [&] { c.sim.validate(); });
  if (c.sim.scheme == Scheme::exact_gbm) {
    require(model.kind == ModelKind::gbm, r, "sim.scheme", "exact-gbm requires the gbm model");
  }

  c.price.t = r.real("price.t");
  c.price.T = r.real("price.T");
  c.price.K = r.real("price.K");
  c.price.z = r.opt_real("price.z");
  c.price.market_price = r.opt_real("price.market_price");
  c.price.method = r.str("price.method");
  require(c.price.t >= 0.0 && c.price.t <= c.price.T, r, "price.T", "need 0 <= t <= T");
  require(c.price.K >= 0.0, r, "price.K", "strike must be non-negative");
  const std::set<std::string> methods{"closed", "quad", "mc", "all"};
  require(methods.count(c.price.method) == 1, r, "price.method",
          "expected closed, quad, mc or all");

  c.martingale_times = r.reals("martingale.times");
  require(!c.martingale_times.empty(), r, "martingale.times", "need at least one time");
  for (std::size_t i = 0; i < c.martingale_times.size(); ++i) {
    const bool ok = c.martingale_times[i] > 0.0 &&
                    (i == 0 || c.martingale_times[i] > c.martingale_times[i - 1]);
    require(ok, r, "martingale.times", "times must be positive and strictly increasing");
  }
  c.martingale_process = r.str("martingale.process");
  const std::set<std::string> processes{"uv", "u", "v", "integral", "semigroup", "all"};
  require(processes.count(c.martingale_process) == 1, r, "martingale.process",
          "expected uv, u, v, integral, semigroup or all");

  c.phi_models = r.at("phi.models").get<std::vector<std::string>>();
  for (const auto& name : c.phi_models) r.guard("phi.models", [&] { return builtin_model(name); });
  c.phi_points = r.u64("phi.points");
  require(c.phi_points >= 2, r, "phi.points", "need at least 2 points");
  c.phi_lo = r.opt_real("phi.lo");
  c.phi_hi = r.opt_real("phi.hi");
  c.phi_tol = r.opt_real("phi.tol");
  if (c.phi_tol) require(*c.phi_tol > 0.0, r, "phi.tol", "tolerance must be positive");
  if (c.phi_lo && c.phi_hi) require(*c.phi_lo < *c.phi_hi, r, "phi.hi", "need lo < hi");

  for (const auto& axis : r.at("scan.axes")) {
    ScanAxis a{axis.at("key").get<std::string>(), axis.at("values").get<std::vector<double>>()};
    const KeySpec* spec = find_spec(a.key);
    require(spec != nullptr && spec->type == ValueType::real, r, "scan.axes",
            "axis key '" + a.key + "' is not a numeric config key");
    require(!a.values.empty(), r, "scan.axes", "axis '" + a.key + "' has no values");
    c.scan_axes.push_back(std::move(a));
  }
  require(c.scan_axes.size() <= 3, r, "scan.axes", "at most 3 axes");

  c.densify_ns = r.at("densify.ns").get<std::vector<std::size_t>>();
  require(!c.densify_ns.empty(), r, "densify.ns", "need at least one grid size");
  for (std::size_t i = 0; i < c.densify_ns.size(); ++i) {
    const bool ok = c.densify_ns[i] > 0 && (i == 0 || c.densify_ns[i] > c.densify_ns[i - 1]);
    require(ok, r, "densify.ns", "grid sizes must be positive and strictly increasing");
  }
  c.densify_exponent = r.real("densify.exponent");
  require(c.densify_exponent > 0.0, r, "densify.exponent", "exponent must be positive");
  c.densify_lhs = r.at("densify.lhs").get<bool>();
  return c;
}

LabConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  Json values = Json::object();
  for (const auto& s : schema()) values[s.key] = s.def;
  std::map<std::string, int> lines;

  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config syntax error at line " + std::to_string(e.mark.line + 1) + ": " +
                      e.msg);
  }
  if (root.IsDefined() && !root.IsNull()) {
    if (!root.IsMap()) throw ConfigError("config must be a mapping of sections");
    walk(root, "", values, lines);
  }

  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + ov + "' must have the form key=value");
    }
    const std::string key = ov.substr(0, eq);
    const KeySpec* spec = find_spec(key);
    if (!spec) throw ConfigError(where(key, -1) + ": unknown key");
    YAML::Node node;
    try {
      node = YAML::Load(ov.substr(eq + 1));
    } catch (const YAML::ParserException& e) {
      throw ConfigError(where(key, -1) + ": cannot parse value: " + e.msg);
    }
    values[key] = convert(node, *spec, -1);
    lines[key] = -1;
  }
  return config_from_values(values, lines);
}

Format format_from_string(const std::string& name) {
  if (name == "json") return Format::json;
  if (name == "csv") return Format::csv;
  throw ConfigError("unknown format '" + name + "' (expected json or csv)");
}

std::vector<std::string> commands() {
  return {"validate-phi", "price",     "implied-vol",      "check-bound",
          "scan",         "densify",   "martingale-check"};
}

Json to_json(const OdeResidualReport& r) {
  return Json{{"points", r.grid.size()},
              {"max_abs_residual", r.max_abs},
              {"rel_scale", r.rel_scale},
              {"tol", r.tol},
              {"positive", r.positive},
              {"convex", r.convex},
              {"passed", r.passed}};
}

Json to_json(const MartingaleTestReport& r) {
  return Json{{"process", r.process},
              {"reference", r.reference},
              {"times", r.times},
              {"means", r.means},
              {"ses", r.ses},
              {"z_scores", r.z_scores},
              {"n_paths", r.n_paths},
              {"n_absorbed", r.n_absorbed},
              {"flags", r.flags},
              {"verdict", r.verdict}};
}

Json to_json(const ResidualTable& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    cells.push_back(Json{{"t", c.t},
                         {"maturity", c.maturity},
                         {"strike", c.strike},
                         {"mean_payoff", c.mean_payoff},
                         {"mean_model_price", c.mean_model_price},
                         {"residual", c.residual},
                         {"se", c.se},
                         {"z", c.z},
                         {"n_exercised", c.n_exercised},
                         {"testable", c.testable}});
  }
  return Json{{"max_abs_z", r.max_abs_z}, {"consistent", r.consistent}, {"cells", cells}};
}

Json to_json(const BoundReport& r) {
  Json ld = Json::array();
  for (const auto& d : r.l_diagnostics) {
    ld.push_back(Json{{"maturity", d.maturity},
                      {"l_at_zero", d.l_at_zero},
                      {"mean_l_at_t", d.mean_l_at_t},
                      {"se_l_at_t", d.se_l_at_t},
                      {"band", d.band},
                      {"n_paths", d.n_paths}});
  }
  return Json{
      {"t", r.t},
      {"x0", r.x0},
      {"q", Json{{"alphas", r.q.alphas}, {"coeffs", r.q.coeffs}, {"x0", r.q.x0}}},
      {"enq", r.enq},
      {"enq_se", r.enq_se},
      {"g_correction", r.g_correction},
      {"g_correction_se", r.g_correction_se},
      {"g_at_zero", r.g_at_zero},
      {"lhs_signed", r.lhs_signed},
      {"lhs", r.lhs},
      {"lhs_se", r.lhs_se},
      {"rhs", Json{{"value", r.rhs.value},
                   {"inner_sum", r.rhs.inner_sum},
                   {"abs_coeff_sum", r.rhs.abs_coeff_sum},
                   {"left_limit_convention", r.rhs.left_limit_convention}}},
      {"satisfied", r.satisfied},
      {"l_side", r.l_side},
      {"l_side_se", r.l_side_se},
      {"l_diagnostics", ld},
      {"n_tq_mean", r.n_tq_mean},
      {"n_tq_half_mean", r.n_tq_half_mean},
      {"n_tq_stable", r.n_tq_stable},
      {"residuals", to_json(r.residuals)},
      {"impossible_conjunction", r.impossible_conjunction},
      {"flags", r.flags}};
}

Json to_json(const DensifyReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json j{{"step", row.step},
           {"n_strikes", row.n_strikes},
           {"k_max", row.k_max},
           {"diagnostic", row.diagnostic},
           {"rhs", row.rhs}};
    j["lhs"] = row.lhs ? Json(*row.lhs) : Json(nullptr);
    j["lhs_se"] = row.lhs_se ? Json(*row.lhs_se) : Json(nullptr);
    rows.push_back(j);
  }
  return Json{{"rows", rows},
              {"diagnostic_decreasing", r.diagnostic_decreasing},
              {"rhs_nonincreasing", r.rhs_nonincreasing},
              {"condition_satisfied", r.condition_satisfied}};
}

std::string report_digest(const Json& report) {
  Json copy = report;
  copy.erase("runtime");
  copy.erase("digest");
  const std::string text = copy.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

std::string csv_cell(const Json& v) {
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
      if (ch == '"') out += '"';
      out += ch;
    }
    return out + "\"";
  }
  return v.dump();
}

void flatten(const Json& v, const std::string& path, std::vector<std::pair<std::string, Json>>& out) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it) {
      flatten(it.value(), path.empty() ? it.key() : path + "/" + it.key(), out);
    }
  } else if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], path + "/" + std::to_string(i), out);
  } else {
    out.emplace_back(path, v);
  }
}

}  // namespace

std::string to_csv(const Json& report) {
  std::ostringstream os;
  const Json* rows = nullptr;
  if (report.contains("result") && report["result"].contains("rows")) rows = &report["result"]["rows"];
  if (rows && !rows->empty()) {
    bool first = true;
    for (auto it = rows->front().begin(); it != rows->front().end(); ++it) {
      os << (first ? "" : ",") << it.key();
      first = false;
    }
    os << '\n';
    for (const auto& row : *rows) {
      first = true;
      for (auto it = row.begin(); it != row.end(); ++it) {
        os << (first ? "" : ",") << csv_cell(it.value());
        first = false;
      }
      os << '\n';
    }
    return os.str();
  }
  std::vector<std::pair<std::string, Json>> flat;
  flatten(report, "", flat);
  os << "key,value\n";
  for (const auto& [k, v] : flat) os << k << ',' << csv_cell(v) << '\n';
  return os.str();
}

namespace {

struct Payload {
  Json result;
  bool pass = true;
};

Payload run_validate_phi(const LabConfig& c) {
  Payload out;
  out.result["models"] = Json::array();
  for (const auto& name : c.phi_models) {
    const ReferenceModel m = builtin_model(name);
    double lo = 0.05;
    double hi = 10.0;
    double tol = m.kind == ModelKind::bessel0 ? 1e-8 : 1e-10;
    if (m.kind == ModelKind::logdiff) {
      lo = 0.01;
      hi = 0.99;
    }
    lo = c.phi_lo.value_or(lo);
    hi = c.phi_hi.value_or(hi);
    tol = c.phi_tol.value_or(tol);
    const auto grid = interior_grid(lo, hi, c.phi_points);
    const OdeResidualReport rep = verify_phi(m, grid, tol);
    Json j = to_json(rep);
    j["model"] = name;
    j["lo"] = lo;
    j["hi"] = hi;
    out.result["models"].push_back(j);
    out.pass = out.pass && rep.passed;
  }
  return out;
}

Json quote_json(const PriceQuote& q) {
  return Json{{"value", q.value}, {"se", q.se}, {"n_paths", q.n_paths}};
}

Payload run_price(const LabConfig& c) {
  Payload out;
  const ReferenceModel& m = c.scenario.reference;
  const double sigma = c.scenario.sigma;
  const double z = c.price.z.value_or(m.z0);
  const auto& p = c.price;
  const bool gbm = m.kind == ModelKind::gbm;
  const bool all = p.method == "all";
  out.result["model"] = m.name;
  out.result["sigma"] = sigma;
  out.result["t"] = p.t;
  out.result["T"] = p.T;
  out.result["K"] = p.K;
  out.result["z"] = z;
  std::optional<PriceQuote> closed;
  std::optional<PriceQuote> mc;
  if (p.method == "closed" || (all && gbm)) {
    closed = model_call_price(m, sigma, p.t, p.T, p.K, z);
    out.result["closed"] = quote_json(*closed);
  }
  if (p.method == "quad" || (all && gbm)) {
    out.result["quad"] = quote_json(quad_call_price(m, sigma, p.t, p.T, p.K, z));
  }
  if (p.method == "mc" || all) {
    mc = mc_call_price(m, sigma, p.t, p.T, p.K, z, c.sim);
    out.result["mc"] = quote_json(*mc);
  }
  if (closed && mc) {
    const double zs = z_score(mc->value, mc->se, closed->value);
    out.result["mc_z_score"] = zs;
    out.pass = std::abs(zs) <= kZScoreBand;
  }
  return out;
}

Payload run_implied_vol(const LabConfig& c) {
  if (!c.price.market_price) throw ConfigError("'price.market_price': required for implied-vol");
  const ReferenceModel& m = c.scenario.reference;
  const double z = c.price.z.value_or(m.z0);
  const auto& p = c.price;
  const ImpliedVolResult r = implied_vol(m, *p.market_price, p.t, p.T, p.K, z);
  Payload out;
  out.result = Json{{"model", m.name},
                    {"market_price", *p.market_price},
                    {"t", p.t},
                    {"T", p.T},
                    {"K", p.K},
                    {"z", z},
                    {"sigma", r.sigma},
                    {"iterations", r.iterations},
                    {"bracket", Json::array({r.bracket_lo, r.bracket_hi})},
                    {"residual", r.residual},
                    {"forward_map", r.forward_map}};
  return out;
}

BoundOptions bound_options(const LabConfig& c) {
  BoundOptions o;
  o.residual_times = c.residual_times;
  o.l_diagnostic_paths = c.l_diagnostic_paths;
  return o;
}

Payload run_check_bound(const LabConfig& c) {
  const BoundReport rep = check_bound(c.scenario, *c.maturities, *c.strikes, *c.weights, c.t,
                                      c.sim, bound_options(c));
  Payload out;
  out.result = to_json(rep);
  out.result["rhs_inputs"] =
      Json{{"strikes", c.strikes->strikes()},
           {"coeffs", rep.q.coeffs},
           {"phi_prime_increments", phi_prime_increments(*c.strikes, c.scenario.reference.phi)}};
  out.result["n_paths"] = c.sim.n_paths;
  out.pass = rep.satisfied;
  return out;
}

Payload run_scan(const LabConfig& c) {
  if (c.scan_axes.empty()) throw ConfigError("'scan.axes': scan needs at least one axis");
  Payload out;
  Json rows = Json::array();
  std::size_t feasible = 0;
  std::size_t conjunctions = 0;
  std::vector<std::size_t> idx(c.scan_axes.size(), 0);
  while (true) {
    Json values = c.values;
    Json row = Json::object();
    for (std::size_t a = 0; a < c.scan_axes.size(); ++a) {
      const double v = c.scan_axes[a].values[idx[a]];
      values[c.scan_axes[a].key] = v;
      row[c.scan_axes[a].key] = v;
    }
    const LabConfig point = config_from_values(values, c.lines);
    const BoundReport rep = check_bound(point.scenario, *point.maturities, *point.strikes,
                                        *point.weights, point.t, point.sim, bound_options(point));
    const bool pass = rep.satisfied && rep.residuals.consistent;
    row["lhs"] = rep.lhs;
    row["lhs_se"] = rep.lhs_se;
    row["rhs"] = rep.rhs.value;
    row["max_abs_z"] = rep.residuals.max_abs_z;
    row["residuals_consistent"] = rep.residuals.consistent;
    row["satisfied"] = rep.satisfied;
    row["impossible_conjunction"] = rep.impossible_conjunction;
    row["pass"] = pass;
    feasible += pass ? 1 : 0;
    conjunctions += rep.impossible_conjunction ? 1 : 0;
    rows.push_back(row);

    std::size_t a = 0;
    for (; a < idx.size(); ++a) {
      if (++idx[a] < c.scan_axes[a].values.size()) break;
      idx[a] = 0;
    }
    if (a == idx.size()) break;
  }
  Json axes = Json::array();
  for (const auto& ax : c.scan_axes) axes.push_back(Json{{"key", ax.key}, {"values", ax.values}});
  out.result["axes"] = axes;
  out.result["n_paths"] = c.sim.n_paths;
  out.result["feasible_points"] = feasible;
  out.result["impossible_conjunctions"] = conjunctions;
  out.result["rows"] = rows;
  out.pass = conjunctions == 0;
  return out;
}

Payload run_densify(const LabConfig& c) {
  const auto schedule = uniform_schedule(c.densify_ns, c.densify_exponent);
  std::optional<SimConfig> lhs_cfg;
  if (c.densify_lhs) lhs_cfg = c.sim;
  const DensifyReport rep = densification_study(c.scenario.reference, c.scenario.sigma,
                                                *c.maturities, *c.weights, schedule, lhs_cfg, c.t);
  Payload out;
  out.result = to_json(rep);
  for (std::size_t i = 0; i < c.densify_ns.size(); ++i) {
    out.result["rows"][i]["n"] = c.densify_ns[i];
  }
  out.pass = rep.condition_satisfied && rep.rhs_nonincreasing;
  return out;
}

Payload run_martingale(const LabConfig& c) {
  const ReferenceModel& m = c.scenario.reference;
  const double sigma = c.scenario.sigma;
  const auto& times = c.martingale_times;
  const std::string& proc = c.martingale_process;
  std::vector<MartingaleTestReport> reps;
  if (proc == "uv" || proc == "all") {
    auto [u, v] = martingale_check_UV(m, sigma, times, c.sim);
    reps.push_back(std::move(u));
    reps.push_back(std::move(v));
  }
  if (proc == "u") reps.push_back(martingale_check_U(m, sigma, times, c.sim));
  if (proc == "v") reps.push_back(martingale_check_V(m, sigma, times, c.sim));
  if (proc == "semigroup" || (proc == "all" && m.h.is_unit())) {
    reps.push_back(semigroup_check(m, sigma, times, c.sim));
  }
  if (proc == "integral" || proc == "all") {
    for (const auto& g : {linear_function(), abs_centered(m.z0), call_payoff(m.z0)}) {
      reps.push_back(martingale_check_integral(m, g, sigma, times, c.sim));
    }
  }
  Payload out;
  out.result["model"] = m.name;
  out.result["sigma"] = sigma;
  out.result["checks"] = Json::array();
  for (const auto& r : reps) {
    out.result["checks"].push_back(to_json(r));
    out.pass = out.pass && r.verdict;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading config file '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open output file '" + path + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing output file '" + path + "'");
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

RunOutcome run(const RunConfig& rc) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  out.report = Json{{"tool", "volbound"}, {"tool_version", kToolVersion}, {"command", rc.command}};
  try {
    const auto cmds = commands();
    if (std::find(cmds.begin(), cmds.end(), rc.command) == cmds.end()) {
      throw ConfigError("unknown command '" + rc.command + "'");
    }
    const std::string text = rc.scenario_file.empty() ? rc.config_text : read_file(rc.scenario_file);
    std::vector<std::string> overrides = rc.overrides;
    if (rc.seed) overrides.push_back("sim.seed=" + std::to_string(*rc.seed));
    if (rc.paths) overrides.push_back("sim.paths=" + std::to_string(*rc.paths));
    if (rc.dt) overrides.push_back("sim.dt=" + fmt_real(*rc.dt));
    LabConfig cfg = parse_config(text, overrides);
    if (rc.workers) cfg.sim.workers = *rc.workers;

    Payload payload;
    if (rc.command == "validate-phi") payload = run_validate_phi(cfg);
    else if (rc.command == "price") payload = run_price(cfg);
    else if (rc.command == "implied-vol") payload = run_implied_vol(cfg);
    else if (rc.command == "check-bound") payload = run_check_bound(cfg);
    else if (rc.command == "scan") payload = run_scan(cfg);
    else if (rc.command == "densify") payload = run_densify(cfg);
    else payload = run_martingale(cfg);

    out.report["seed"] = cfg.sim.seed;
    out.report["config"] = cfg.values;
    out.report["result"] = std::move(payload.result);
    out.report["verdict"] = payload.pass ? "pass" : "fail";
    out.report["digest"] = report_digest(out.report);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.report["runtime"] = Json{{"wall_seconds", wall}, {"workers", cfg.sim.resolved_workers()}};
    out.rendered = rc.format == Format::json ? out.report.dump(2) + "\n" : to_csv(out.report);
    out.exit_code = payload.pass ? kExitOk : kExitFailed;
    if (!rc.out_path.empty()) write_file(rc.out_path, out.rendered);
  } catch (const IoError& e) {
    out.exit_code = kExitIo;
    out.error = e.what();
  } catch (const std::invalid_argument& e) {
    out.exit_code = kExitConfig;
    out.error = e.what();
  } catch (const std::exception& e) {
    out.exit_code = kExitFailed;
    out.error = e.what();
  }
  if (!out.error.empty()) {
    out.report["error"] = out.error;
    out.report["exit_code"] = out.exit_code;
    out.rendered = out.report.dump(2) + "\n";
  }
  return out;
}

}  // namespace volbound::lab
