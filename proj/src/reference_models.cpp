#include "volbound/reference_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "volbound/errors.hpp"
#include "volbound/parallel.hpp"
#include "volbound/special_functions.hpp"

namespace volbound {

TimeWeight::TimeWeight(Kind kind, std::vector<double> values, std::vector<double> breakpoints)
    : kind_(kind), values_(std::move(values)), breakpoints_(std::move(breakpoints)) {
  for (double v : values_) {
    if (!std::isfinite(v) || v == 0.0) {
      throw DomainError("TimeWeight: values must be finite and non-zero");
    }
  }
  if (values_.size() != breakpoints_.size() + 1) {
    throw DomainError("TimeWeight: need exactly one more value than breakpoints");
  }
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i]) || (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))) {
      throw DomainError("TimeWeight: breakpoints must be finite and strictly increasing");
    }
  }
}

TimeWeight TimeWeight::constant(double value) { return TimeWeight(Kind::constant, {value}, {}); }

TimeWeight TimeWeight::piecewise(std::vector<double> values, std::vector<double> breakpoints) {
  return TimeWeight(Kind::piecewise_constant, std::move(values), std::move(breakpoints));
}

double TimeWeight::operator()(double t) const {
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
}

double TimeWeight::sq_integral(double a, double b) const {
  if (a > b) throw DomainError("h_sq_integral: lower limit exceeds upper limit");
  if (a == b) return 0.0;
  double total = 0.0;
  double left = a;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double right = i < breakpoints_.size() ? std::min(b, breakpoints_[i]) : b;
    if (right > left) {
      total += values_[i] * values_[i] * (right - left);
      left = right;
    }
    if (left >= b) break;
  }
  return total;
}

bool TimeWeight::is_unit() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::abs(v) == 1.0; });
}

double h_sq_integral(const TimeWeight& h, double a, double b) { return h.sq_integral(a, b); }

PhiFunction PhiFunction::scaled(double c) const {
  PhiFunction out;
  out.value = [f = value, c](double z) { return c * f(z); };
  out.deriv1 = [f = deriv1, c](double z) { return c * f(z); };
  out.deriv2 = [f = deriv2, c](double z) { return c * f(z); };
  out.provenance = provenance;
  return out;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gbm: return "gbm";
    case ModelKind::bessel0: return "bessel0";
    case ModelKind::logdiff: return "logdiff";
    case ModelKind::custom: return "custom";
  }
  return "custom";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ReferenceModel make_gbm() {
  ReferenceModel m;
  m.name = "gbm";
  m.kind = ModelKind::gbm;
  m.beta.beta = [](double z) { return std::max(z, 0.0); };
  m.beta.lower = 0.0;
  m.beta.upper = kInf;
  m.phi.value = [](double z) { return z * z; };
  m.phi.deriv1 = [](double z) { return 2.0 * z; };
  m.phi.deriv2 = [](double) { return 2.0; };
  m.z0 = 1.0;
  return m;
}

ReferenceModel make_bessel0() {
  ReferenceModel m;
  m.name = "bessel0";
  m.kind = ModelKind::bessel0;
  m.beta.beta = [](double z) { return std::sqrt(std::max(z, 0.0)); };
  m.beta.lower = 0.0;
  m.beta.upper = kInf;
  // x = 2 sqrt(2z): phi = x K1(x), phi' = -4 K0(x), phi'' = 16 K1(x) / x.
  m.phi.value = [](double z) {
    if (z <= 0.0) return 1.0;
    const double x = 2.0 * std::sqrt(2.0 * z);
    return x * bessel_k(BesselOrder::k1, x);
  };
  m.phi.deriv1 = [](double z) {
    if (z <= 0.0) return -kInf;
    const double x = 2.0 * std::sqrt(2.0 * z);
    return -4.0 * bessel_k(BesselOrder::k0, x);
  };
  m.phi.deriv2 = [](double z) {
    if (z <= 0.0) return kInf;
    const double x = 2.0 * std::sqrt(2.0 * z);
    return 16.0 * bessel_k(BesselOrder::k1, x) / x;
  };
  m.z0 = 1.0;
  return m;
}

ReferenceModel make_logdiff() {
  ReferenceModel m;
  m.name = "logdiff";
  m.kind = ModelKind::logdiff;
  m.beta.beta = [](double z) {
    if (z <= 0.0 || z >= 1.0) return 0.0;
    return z * std::sqrt(std::max(-2.0 * std::log(z), 0.0));
  };
  m.beta.lower = 0.0;
  m.beta.upper = 1.0;
  m.phi.value = [](double z) { return z <= 0.0 ? kInf : -std::log(z); };
  m.phi.deriv1 = [](double z) { return z <= 0.0 ? -kInf : -1.0 / z; };
  m.phi.deriv2 = [](double z) { return z <= 0.0 ? kInf : 1.0 / (z * z); };
  m.z0 = 0.5;
  return m;
}

}  // namespace

ReferenceModel builtin_model(ModelKind kind) {
  switch (kind) {
    case ModelKind::gbm: return make_gbm();
    case ModelKind::bessel0: return make_bessel0();
    case ModelKind::logdiff: return make_logdiff();
    case ModelKind::custom: break;
  }
  throw ConfigError("builtin_model: 'custom' is not a builtin model");
}

ReferenceModel builtin_model(const std::string& name) {
  if (name == "gbm") return make_gbm();
  if (name == "bessel0") return make_bessel0();
  if (name == "logdiff") return make_logdiff();
  throw ConfigError("unknown model '" + name + "' (expected gbm, bessel0 or logdiff)");
}

std::string to_string(Scheme scheme) {
  return scheme == Scheme::exact_gbm ? "exact-gbm" : "euler-maruyama";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "euler-maruyama") return Scheme::euler_maruyama;
  if (name == "exact-gbm") return Scheme::exact_gbm;
  throw ConfigError("unknown scheme '" + name + "' (expected euler-maruyama or exact-gbm)");
}

void SimConfig::validate() const {
  if (n_paths < 1) throw ConfigError("SimConfig: n_paths must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("SimConfig: dt must be positive");
  if (inner_paths < 1) throw ConfigError("SimConfig: inner_paths must be >= 1");
}

unsigned SimConfig::resolved_workers() const { return workers == 0 ? default_workers() : workers; }

StepGrid make_step_grid(const TimeWeight& h, double t_start, std::span<const double> grid,
                        double dt) {
  if (grid.empty()) throw DomainError("time grid is empty");
  if (grid.front() != t_start) throw DomainError("time grid must start at t_start");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw DomainError("time grid must be strictly increasing");
  }
  StepGrid out;
  out.times.push_back(grid.front());
  out.record_index.push_back(0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double a = grid[i - 1];
    const double b = grid[i];
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((b - a) / dt - 1e-9)));
    for (std::size_t k = 1; k <= n; ++k) {
      const double t = k == n ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(n);
      out.h_sq.push_back(h.sq_integral(out.times.back(), t));
      out.times.push_back(t);
    }
    out.record_index.push_back(out.times.size() - 1);
  }
  return out;
}

PathStepper::PathStepper(const ReferenceModel& model, Scheme scheme)
    : model_(&model), scheme_(scheme) {
  if (scheme == Scheme::exact_gbm && model.kind != ModelKind::gbm) {
    throw ConfigError("exact-gbm scheme requested for non-gbm model '" + model.name + "'");
  }
}

double PathStepper::step(double z, double sigma, double h_sq, double normal,
                         bool& absorbed) const {
  if (absorbed) return z;
  const StateDiffusion& dom = model_->beta;
  double next;
  if (scheme_ == Scheme::exact_gbm) {
    const double var = sigma * sigma * h_sq;
    next = z * std::exp(std::sqrt(var) * normal - 0.5 * var);
  } else {
    next = z + sigma * dom.beta(z) * std::sqrt(h_sq) * normal;
  }
  if (next <= dom.lower) {
    absorbed = true;
    return dom.lower;
  }
  if (next >= dom.upper) {
    absorbed = true;
    return dom.upper;
  }
  return next;
}

void simulate_paths(const ReferenceModel& model, double sigma, double z_start, double t_start,
                    std::span<const double> time_grid, const SimConfig& cfg,
                    const PathVisitor& visit) {
  cfg.validate();
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError("simulate: sigma must be finite and non-negative");
  }
  if (!model.beta.in_closure(z_start) || !std::isfinite(z_start)) {
    throw DomainError("simulate: start state " + std::to_string(z_start) +
                      " outside the domain closure of model '" + model.name + "'");
  }
  const PathStepper stepper(model, cfg.scheme);
  const StepGrid grid = make_step_grid(model.h, t_start, time_grid, cfg.dt);
  const bool starts_on_boundary = !model.beta.in_interior(z_start);
  const std::size_t n_blocks = (cfg.n_paths + kPathsPerBlock - 1) / kPathsPerBlock;
  parallel_blocks(n_blocks, cfg.resolved_workers(), [&](std::size_t block) {
    RngStream rng = rng_substream(cfg.seed, block);
    std::vector<double> states(grid.times.size());
    const std::size_t first = block * kPathsPerBlock;
    const std::size_t last = std::min(cfg.n_paths, first + kPathsPerBlock);
    for (std::size_t p = first; p < last; ++p) {
      bool absorbed = starts_on_boundary;
      std::optional<double> tau;
      std::optional<std::size_t> tau_index;
      if (absorbed) {
        tau = grid.times.front();
        tau_index = 0;
      }
      states[0] = z_start;
      for (std::size_t k = 0; k < grid.n_steps(); ++k) {
        const double normal = rng.normal();
        const bool was_absorbed = absorbed;
        states[k + 1] = stepper.step(states[k], sigma, grid.h_sq[k], normal, absorbed);
        if (absorbed && !was_absorbed) {
          tau = grid.times[k + 1];
          tau_index = k + 1;
        }
      }
      visit(p, FinePath{grid, states, tau, tau_index});
    }
  });
}

std::vector<double> PathEnsemble::column(std::size_t time_index) const {
  std::vector<double> out(n_paths());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = state(p, time_index);
  return out;
}

PathEnsemble simulate(const ReferenceModel& model, double sigma, double z_start, double t_start,
                      std::span<const double> time_grid, const SimConfig& cfg) {
  PathEnsemble out;
  out.time_grid.assign(time_grid.begin(), time_grid.end());
  out.sigma = sigma;
  const std::size_t n_times = time_grid.size();
  out.states.assign(cfg.n_paths * n_times, 0.0);
  out.absorbed_at.assign(cfg.n_paths, std::nullopt);
  simulate_paths(model, sigma, z_start, t_start, time_grid, cfg,
                 [&](std::size_t p, const FinePath& path) {
                   for (std::size_t i = 0; i < n_times; ++i) {
                     out.states[p * n_times + i] = path.states[path.grid.record_index[i]];
                   }
                   out.absorbed_at[p] = path.tau;
                 });
  return out;
}

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  out.mean = sum / static_cast<double>(n);
  if (n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

}  // namespace volbound
