#include "volbound/phi_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>

#include <boost/numeric/odeint.hpp>

#include "volbound/errors.hpp"

namespace volbound {

std::vector<double> interior_grid(double lo, double hi, std::size_t n) {
  if (!(hi > lo) || n == 0) throw DomainError("interior_grid: empty interval");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }
  return out;
}

OdeResidualReport verify_phi(const ReferenceModel& model, std::span<const double> grid,
                             double tol) {
  if (!(tol > 0.0)) throw DomainError("verify_phi: tolerance must be positive");
  OdeResidualReport rep;
  rep.tol = tol;
  rep.grid.assign(grid.begin(), grid.end());
  rep.residuals.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = grid[i];
    if (!model.beta.in_interior(z)) {
      throw DomainError("verify_phi: grid point " + std::to_string(z) +
                        " outside the open domain of '" + model.name + "'");
    }
    if (i > 0 && !(z > grid[i - 1])) {
      throw DomainError("verify_phi: grid must be strictly increasing");
    }
    const double b = model.beta(z);
    const double phi = model.phi.value(z);
    const double d2 = model.phi.deriv2(z);
    const double r = 0.5 * b * b * d2 - phi;
    rep.residuals.push_back(r);
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
    rep.rel_scale = std::max(rep.rel_scale, std::abs(phi));
    if (!(phi > 0.0)) rep.positive = false;
    if (!(d2 >= 0.0)) rep.convex = false;
  }
  rep.passed = rep.max_abs <= tol * std::max(1.0, rep.rel_scale) && rep.positive && rep.convex;
  return rep;
}

namespace {

using OdeState = std::array<double, 2>;  // (phi, phi')

struct Node {
  double z;
  double v;
  double d1;
  double d2;
};

// Piecewise quintic Hermite interpolant through (phi, phi', phi'') at nodes.
class QuinticTable {
 public:
  explicit QuinticTable(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    coeffs_.reserve(nodes_.size());
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
      const Node& a = nodes_[i];
      const Node& b = nodes_[i + 1];
      const double h = b.z - a.z;
      const double d0 = b.v - (a.v + a.d1 * h + 0.5 * a.d2 * h * h);
      const double d1 = b.d1 - (a.d1 + a.d2 * h);
      const double d2 = b.d2 - a.d2;
      const double h2 = h * h;
      coeffs_.push_back({a.v, a.d1, 0.5 * a.d2, (10.0 * d0 - 4.0 * d1 * h + 0.5 * d2 * h2) / (h2 * h),
                         (-15.0 * d0 + 7.0 * d1 * h - d2 * h2) / (h2 * h2),
                         (6.0 * d0 - 3.0 * d1 * h + 0.5 * d2 * h2) / (h2 * h2 * h)});
    }
  }

  double eval(double z, int derivative) const {
    const std::size_t i = locate(z);
    const auto& c = coeffs_[i];
    const double u = z - nodes_[i].z;
    switch (derivative) {
      case 0: return c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
      case 1:
        return c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5])));
      default: return 2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5]));
    }
  }

  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::size_t locate(double z) const {
    if (z < nodes_.front().z || z > nodes_.back().z) {
      throw DomainError("numeric phi evaluated outside its solution window");
    }
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), z,
                                     [](double v, const Node& n) { return v < n.z; });
    const std::size_t idx = static_cast<std::size_t>(it - nodes_.begin());
    return std::min(idx == 0 ? 0 : idx - 1, coeffs_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<std::array<double, 6>> coeffs_;
};

constexpr double kOdeAbsTol = 1e-13;
constexpr double kOdeRelTol = 1e-13;

class PhiOde {
 public:
  explicit PhiOde(const StateDiffusion& beta) : beta_(&beta) {}

  void operator()(const OdeState& x, OdeState& dxdz, double z) const {
    const double b = beta_->beta(z);
    dxdz[0] = x[1];
    dxdz[1] = 2.0 * x[0] / (b * b);
  }

  double second(double z, double phi) const {
    const double b = beta_->beta(z);
    return 2.0 * phi / (b * b);
  }

 private:
  const StateDiffusion* beta_;
};

// Integrates from z_ref through the (monotone) `targets`, recording states.
std::vector<OdeState> integrate_to(const PhiOde& ode, OdeState start, double z_ref,
                                   const std::vector<double>& targets) {
  namespace odeint = boost::numeric::odeint;
  std::vector<double> times;
  times.reserve(targets.size() + 1);
  times.push_back(z_ref);
  times.insert(times.end(), targets.begin(), targets.end());
  std::vector<OdeState> out;
  out.reserve(times.size());
  auto stepper =
      odeint::make_dense_output(kOdeAbsTol, kOdeRelTol, odeint::runge_kutta_dopri5<OdeState>());
  const double span = std::abs(times.back() - times.front());
  const double dz = (times.back() > times.front() ? 1.0 : -1.0) * span * 1e-4;
  odeint::integrate_times(stepper, std::cref(ode), start, times.begin(), times.end(), dz,
                          [&](const OdeState& x, double) { out.push_back(x); });
  out.erase(out.begin());
  return out;
}

std::vector<double> linspace_excl(double from, double to, std::size_t n) {
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    out.push_back(i == n ? to : from + (to - from) * static_cast<double>(i) / static_cast<double>(n));
  }
  return out;
}

double min_on_path(const PhiOde& ode, double value, double slope, double z_ref, double z_end,
                   std::size_t n) {
  const auto states = integrate_to(ode, {value, slope}, z_ref, linspace_excl(z_ref, z_end, n));
  double m = value;
  for (const auto& s : states) m = std::min(m, s[0]);
  return m;
}

}  // namespace

PhiSolution solve_phi(const StateDiffusion& beta, const PhiAnchor& anchor, double window_lo,
                      double window_hi, std::size_t mesh) {
  if (!(anchor.value > 0.0)) {
    throw InfeasibleError("solve_phi: anchor value must be positive");
  }
  if (!(window_lo < window_hi) || !beta.in_interior(window_lo) || !beta.in_interior(window_hi)) {
    throw DomainError("solve_phi: window must lie strictly inside the state domain");
  }
  if (!(anchor.z_ref >= window_lo && anchor.z_ref <= window_hi)) {
    throw DomainError("solve_phi: anchor point outside the window");
  }
  if (mesh < 2) throw DomainError("solve_phi: mesh needs at least two intervals");

  const std::vector<double> nodes_z = [&] {
    std::vector<double> z(mesh + 1);
    for (std::size_t i = 0; i <= mesh; ++i) {
      z[i] = i == mesh ? window_hi
                       : window_lo + (window_hi - window_lo) * static_cast<double>(i) /
                                         static_cast<double>(mesh);
    }
    z.push_back(anchor.z_ref);
    std::sort(z.begin(), z.end());
    z.erase(std::unique(z.begin(), z.end()), z.end());
    return z;
  }();
  for (double z : nodes_z) {
    const double b = beta.beta(z);
    if (!std::isfinite(b) || b == 0.0) {
      throw DomainError("solve_phi: beta is singular at z = " + std::to_string(z));
    }
  }
  const PhiOde ode(beta);

  double slope = 0.0;
  if (anchor.slope) {
    slope = *anchor.slope;
  } else {
    // Recessive (minimal-growth) solution toward the upper end: the threshold
    // slope between solutions that cross zero before an extended horizon and
    // those that stay positive.
    double horizon = anchor.z_ref + 4.0 * (window_hi - anchor.z_ref);
    if (horizon <= window_hi) horizon = window_hi + (window_hi - window_lo);
    if (std::isfinite(beta.upper)) horizon = std::min(horizon, 0.5 * (window_hi + beta.upper));
    const std::size_t probe = 4 * mesh;
    const auto crosses = [&](double s) {
      return min_on_path(ode, anchor.value, s, anchor.z_ref, horizon, probe) <= 0.0;
    };
    double positive_slope = 0.0;
    double crossing_slope = -anchor.value / (horizon - anchor.z_ref);
    for (int k = 0; k < 200 && !crosses(crossing_slope); ++k) crossing_slope *= 2.0;
    if (!crosses(crossing_slope)) {
      throw InfeasibleError("solve_phi: shooting could not find a crossing slope");
    }
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (positive_slope + crossing_slope);
      if (mid == positive_slope || mid == crossing_slope) break;
      (crosses(mid) ? crossing_slope : positive_slope) = mid;
    }
    slope = positive_slope;
  }

  std::vector<double> upper;
  std::vector<double> lower;
  for (double z : nodes_z) {
    if (z > anchor.z_ref) upper.push_back(z);
    if (z < anchor.z_ref) lower.push_back(z);
  }
  std::reverse(lower.begin(), lower.end());
  std::vector<Node> nodes;
  nodes.reserve(nodes_z.size());
  const auto lower_states = lower.empty() ? std::vector<OdeState>{}
                                          : integrate_to(ode, {anchor.value, slope}, anchor.z_ref, lower);
  for (std::size_t i = lower.size(); i-- > 0;) {
    nodes.push_back({lower[i], lower_states[i][0], lower_states[i][1],
                     ode.second(lower[i], lower_states[i][0])});
  }
  nodes.push_back({anchor.z_ref, anchor.value, slope, ode.second(anchor.z_ref, anchor.value)});
  const auto upper_states = upper.empty() ? std::vector<OdeState>{}
                                          : integrate_to(ode, {anchor.value, slope}, anchor.z_ref, upper);
  for (std::size_t i = 0; i < upper.size(); ++i) {
    nodes.push_back({upper[i], upper_states[i][0], upper_states[i][1],
                     ode.second(upper[i], upper_states[i][0])});
  }
  for (const Node& n : nodes) {
    if (!(n.v > 0.0)) {
      throw InfeasibleError("solve_phi: solution crosses zero at z = " + std::to_string(n.z));
    }
  }

  auto table = std::make_shared<const QuinticTable>(std::move(nodes));
  PhiSolution out;
  out.slope = slope;
  out.window_lo = window_lo;
  out.window_hi = window_hi;
  out.phi.value = [table](double z) { return table->eval(z, 0); };
  out.phi.deriv1 = [table](double z) { return table->eval(z, 1); };
  out.phi.deriv2 = [table](double z) { return table->eval(z, 2); };
  out.phi.provenance = PhiFunction::Provenance::numeric;
  for (const Node& n : table->nodes()) {
    const double b = beta.beta(n.z);
    const double r = 0.5 * b * b * table->eval(n.z, 2) - table->eval(n.z, 0);
    out.max_mesh_residual = std::max(out.max_mesh_residual, std::abs(r));
  }
  return out;
}

double z_score(double mean, double se, double reference) {
  const double diff = mean - reference;
  if (se > 0.0) return diff / se;
  if (std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(reference))) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
}

namespace {

std::vector<double> checked_times(std::span<const double> times) {
  if (times.empty()) throw DomainError("martingale check: no test times");
  std::vector<double> grid{0.0};
  for (double t : times) {
    if (!(t > grid.back())) {
      throw DomainError("martingale check: test times must be positive and increasing");
    }
    grid.push_back(t);
  }
  return grid;
}

std::vector<double> cumulative_h_sq(const StepGrid& grid) {
  std::vector<double> cum(grid.times.size(), 0.0);
  for (std::size_t k = 0; k < grid.n_steps(); ++k) cum[k + 1] = cum[k] + grid.h_sq[k];
  return cum;
}

MartingaleTestReport summarize(std::string process, std::span<const double> times,
                               const std::vector<std::vector<double>>& samples, double reference,
                               std::size_t n_paths) {
  MartingaleTestReport rep;
  rep.process = std::move(process);
  rep.times.assign(times.begin(), times.end());
  rep.reference = reference;
  rep.n_paths = n_paths;
  rep.verdict = true;
  for (const auto& column : samples) {
    const MeanSe ms = mean_se(column);
    if (!std::isfinite(ms.mean)) {
      throw DivergenceError("martingale check: non-finite sample mean for " + rep.process);
    }
    const double z = z_score(ms.mean, ms.se, reference);
    rep.means.push_back(ms.mean);
    rep.ses.push_back(ms.se);
    rep.z_scores.push_back(z);
    if (!(std::abs(z) <= kZScoreBand)) rep.verdict = false;
  }
  return rep;
}

std::size_t stop_index(const FinePath& path, std::size_t record) {
  return path.tau_index && *path.tau_index < record ? *path.tau_index : record;
}

void flag_boundary(MartingaleTestReport& rep, const ReferenceModel& model,
                   std::size_t zero_phi, std::size_t absorbed) {
  rep.n_absorbed = absorbed;
  if (zero_phi > 0) {
    rep.flags.push_back(std::to_string(zero_phi) + " path(s) of '" + model.name +
                        "' stopped where phi is not positive; martingale property holds only "
                        "up to the absorption time");
  }
}

}  // namespace

std::pair<MartingaleTestReport, MartingaleTestReport> martingale_check_UV(
    const ReferenceModel& model, double sigma, std::span<const double> times,
    const SimConfig& cfg) {
  const std::vector<double> grid_times = checked_times(times);
  const StepGrid grid = make_step_grid(model.h, 0.0, grid_times, cfg.dt);
  const std::vector<double> cum = cumulative_h_sq(grid);
  const std::size_t n_t = times.size();
  std::vector<std::vector<double>> u(n_t, std::vector<double>(cfg.n_paths));
  std::vector<std::vector<double>> v(n_t, std::vector<double>(cfg.n_paths));
  std::vector<unsigned char> nonpositive(cfg.n_paths, 0);
  std::vector<unsigned char> absorbed(cfg.n_paths, 0);
  const double s2 = sigma * sigma;
  simulate_paths(model, sigma, model.z0, 0.0, grid_times, cfg,
                 [&](std::size_t p, const FinePath& path) {
                   double integral = 0.0;
                   double phi_prev = model.phi.value(path.states[0]);
                   std::size_t k = 0;
                   for (std::size_t i = 0; i < n_t; ++i) {
                     const std::size_t stop = stop_index(path, path.grid.record_index[i + 1]);
                     for (; k < stop; ++k) {
                       const double phi_next = model.phi.value(path.states[k + 1]);
                       integral += 0.5 * (phi_prev + phi_next) * path.grid.h_sq[k];
                       phi_prev = phi_next;
                     }
                     const double phi = model.phi.value(path.states[stop]);
                     u[i][p] = std::exp(-s2 * cum[stop]) * phi;
                     v[i][p] = phi - s2 * integral;
                   }
                   absorbed[p] = path.tau ? 1 : 0;
                   if (path.tau && !(model.phi.value(path.states[*path.tau_index]) > 0.0)) {
                     nonpositive[p] = 1;
                   }
                 });
  const double ref = model.phi.value(model.z0);
  auto rep_u = summarize("U", times, u, ref, cfg.n_paths);
  auto rep_v = summarize("V", times, v, ref, cfg.n_paths);
  const auto count = [](const std::vector<unsigned char>& f) {
    return static_cast<std::size_t>(std::count(f.begin(), f.end(), 1));
  };
  flag_boundary(rep_u, model, count(nonpositive), count(absorbed));
  flag_boundary(rep_v, model, count(nonpositive), count(absorbed));
  return {std::move(rep_u), std::move(rep_v)};
}

MartingaleTestReport martingale_check_U(const ReferenceModel& model, double sigma,
                                        std::span<const double> times, const SimConfig& cfg) {
  return martingale_check_UV(model, sigma, times, cfg).first;
}

MartingaleTestReport martingale_check_V(const ReferenceModel& model, double sigma,
                                        std::span<const double> times, const SimConfig& cfg) {
  return martingale_check_UV(model, sigma, times, cfg).second;
}

ConvexTestFunction linear_function() {
  return {"z", [](double z) { return z; }, [](double) { return 1.0; }, 1.0};
}

ConvexTestFunction abs_centered(double center) {
  return {"|z-" + std::to_string(center) + "|",
          [center](double z) { return std::abs(z - center); },
          [center](double z) { return z <= center ? -1.0 : 1.0; },
          1.0 + std::abs(center)};
}

ConvexTestFunction call_payoff(double strike) {
  return {"(z-" + std::to_string(strike) + ")+",
          [strike](double z) { return std::max(z - strike, 0.0); },
          [strike](double z) { return z <= strike ? 0.0 : 1.0; },
          1.0 + std::abs(strike)};
}

MartingaleTestReport martingale_check_integral(const ReferenceModel& model,
                                               const ConvexTestFunction& g, double sigma,
                                               std::span<const double> times,
                                               const SimConfig& cfg) {
  const std::vector<double> grid_times = checked_times(times);
  const std::size_t n_t = times.size();
  std::vector<std::vector<double>> samples(n_t, std::vector<double>(cfg.n_paths));
  simulate_paths(model, sigma, model.z0, 0.0, grid_times, cfg,
                 [&](std::size_t p, const FinePath& path) {
                   double integral = 0.0;
                   std::size_t k = 0;
                   for (std::size_t i = 0; i < n_t; ++i) {
                     const std::size_t end = path.grid.record_index[i + 1];
                     for (; k < end; ++k) {
                       integral += g.left_derivative(path.states[k]) *
                                   (path.states[k + 1] - path.states[k]);
                     }
                     samples[i][p] = integral;
                   }
                 });
  auto rep = summarize("int g'(Z) dZ, g = " + g.name, times, samples, 0.0, cfg.n_paths);
  return rep;
}

MartingaleTestReport semigroup_check(const ReferenceModel& model, double sigma,
                                     std::span<const double> times, const SimConfig& cfg) {
  if (!model.h.is_unit()) {
    throw ConfigError("semigroup_check: requires a time-homogeneous model (h == 1)");
  }
  const std::vector<double> grid_times = checked_times(times);
  const std::size_t n_t = times.size();
  std::vector<std::vector<double>> samples(n_t, std::vector<double>(cfg.n_paths));
  std::vector<unsigned char> absorbed(cfg.n_paths, 0);
  simulate_paths(model, sigma, model.z0, 0.0, grid_times, cfg,
                 [&](std::size_t p, const FinePath& path) {
                   for (std::size_t i = 0; i < n_t; ++i) {
                     samples[i][p] =
                         std::exp(-sigma * sigma * times[i]) *
                         model.phi.value(path.states[path.grid.record_index[i + 1]]);
                   }
                   absorbed[p] = path.tau ? 1 : 0;
                 });
  // Tested in the discounted form E[exp(-sigma^2 t) phi(Z_t)] = phi(z0).
  auto rep = summarize("P_t phi", times, samples, model.phi.value(model.z0), cfg.n_paths);
  rep.n_absorbed = static_cast<std::size_t>(std::count(absorbed.begin(), absorbed.end(), 1));
  return rep;
}

}  // namespace volbound
