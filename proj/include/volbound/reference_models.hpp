#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volbound/rng.hpp"

namespace volbound {

// Deterministic time weight h(t). Constant or piecewise constant, with
// h = values[i] on [breakpoints[i-1], breakpoints[i]).
class TimeWeight {
 public:
  enum class Kind { constant, piecewise_constant };

  static TimeWeight constant(double value = 1.0);
  static TimeWeight piecewise(std::vector<double> values, std::vector<double> breakpoints);

  double operator()(double t) const;

  // Exact integral of h(s)^2 over [a, b].
  double sq_integral(double a, double b) const;

  Kind kind() const { return kind_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  bool is_unit() const;

 private:
  TimeWeight(Kind kind, std::vector<double> values, std::vector<double> breakpoints);

  Kind kind_;
  std::vector<double> values_;
  std::vector<double> breakpoints_;
};

double h_sq_integral(const TimeWeight& h, double a, double b);

struct StateDiffusion {
  std::function<double(double)> beta;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  double operator()(double z) const { return beta(z); }
  bool in_interior(double z) const { return z > lower && z < upper; }
  bool in_closure(double z) const { return z >= lower && z <= upper; }
};

struct PhiFunction {
  enum class Provenance { closed_form, numeric };

  std::function<double(double)> value;
  std::function<double(double)> deriv1;
  std::function<double(double)> deriv2;
  Provenance provenance = Provenance::closed_form;

  double operator()(double z) const { return value(z); }

  // c * phi, used for scale-equivariance checks.
  PhiFunction scaled(double c) const;
};

enum class ModelKind { gbm, bessel0, logdiff, custom };

std::string to_string(ModelKind kind);

struct ReferenceModel {
  std::string name;
  ModelKind kind = ModelKind::custom;
  TimeWeight h = TimeWeight::constant();
  StateDiffusion beta;
  PhiFunction phi;
  double z0 = 1.0;

  bool has_lognormal_transition() const { return kind == ModelKind::gbm; }
};

// gbm: beta(z) = z, phi = z^2, (0, inf)
// bessel0: beta(z) = sqrt(z), phi = 2 sqrt(2z) K1(2 sqrt(2z)), (0, inf)
// logdiff: beta(z) = z sqrt(-2 ln z), phi = -ln z, (0, 1)
ReferenceModel builtin_model(const std::string& name);
ReferenceModel builtin_model(ModelKind kind);

enum class Scheme { euler_maruyama, exact_gbm };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct SimConfig {
  std::size_t n_paths = 10000;
  double dt = 1e-2;
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::euler_maruyama;
  unsigned workers = 0;           // 0: default_workers()
  std::size_t inner_paths = 256;  // nested expectations without a closed form

  void validate() const;
  unsigned resolved_workers() const;
};

// Simulation grid: the union of user times and internal steps of size <= dt.
struct StepGrid {
  std::vector<double> times;
  std::vector<double> h_sq;               // integral of h^2 over each step
  std::vector<std::size_t> record_index;  // fine index of each user grid time

  std::size_t n_steps() const { return h_sq.size(); }
};

StepGrid make_step_grid(const TimeWeight& h, double t_start, std::span<const double> grid,
                        double dt);

// One Euler-Maruyama (or exact lognormal) step with absorption at the domain
// boundary. Returns the new state; sets `absorbed` when a boundary is hit.
class PathStepper {
 public:
  PathStepper(const ReferenceModel& model, Scheme scheme);

  double step(double z, double sigma, double h_sq, double normal, bool& absorbed) const;

  const ReferenceModel& model() const { return *model_; }

 private:
  const ReferenceModel* model_;
  Scheme scheme_;
};

struct FinePath {
  const StepGrid& grid;
  std::span<const double> states;  // one entry per grid.times
  std::optional<double> tau;       // absorption time
  std::optional<std::size_t> tau_index;
};

using PathVisitor = std::function<void(std::size_t path, const FinePath& path_view)>;

// Simulates cfg.n_paths paths and hands each fine trajectory to `visit`.
// Path p draws from substream (seed, p / kPathsPerBlock); visits for a block
// happen on one thread in path order.
void simulate_paths(const ReferenceModel& model, double sigma, double z_start, double t_start,
                    std::span<const double> time_grid, const SimConfig& cfg,
                    const PathVisitor& visit);

struct PathEnsemble {
  std::vector<double> time_grid;
  std::vector<double> states;  // row-major, n_paths x time_grid.size()
  std::vector<std::optional<double>> absorbed_at;
  double sigma = 0.0;

  std::size_t n_paths() const { return absorbed_at.size(); }
  double state(std::size_t path, std::size_t time_index) const {
    return states[path * time_grid.size() + time_index];
  }
  std::vector<double> column(std::size_t time_index) const;
};

PathEnsemble simulate(const ReferenceModel& model, double sigma, double z_start, double t_start,
                      std::span<const double> time_grid, const SimConfig& cfg);

// Sample mean and standard error, summed in index order.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(std::span<const double> values);

}  // namespace volbound
