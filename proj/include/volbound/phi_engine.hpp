#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volbound/reference_models.hpp"

namespace volbound {

struct OdeResidualReport {
  std::vector<double> grid;
  std::vector<double> residuals;  // 0.5 beta^2 phi'' - phi
  double max_abs = 0.0;
  double rel_scale = 0.0;  // max |phi| on the grid
  double tol = 0.0;
  bool positive = true;
  bool convex = true;
  bool passed = false;
};

OdeResidualReport verify_phi(const ReferenceModel& model, std::span<const double> grid,
                             double tol);

// Uniform grid of n points strictly inside [lo, hi].
std::vector<double> interior_grid(double lo, double hi, std::size_t n);

struct PhiAnchor {
  double z_ref = 1.0;
  double value = 1.0;
  std::optional<double> slope;  // unset: shooting for the recessive solution
};

struct PhiSolution {
  PhiFunction phi;
  double slope = 0.0;  // phi'(z_ref) actually used
  double window_lo = 0.0;
  double window_hi = 0.0;
  double max_mesh_residual = 0.0;
};

// Numerically integrates 0.5 beta^2 phi'' = phi from the anchor across the
// window and returns a piecewise quintic Hermite representation.
PhiSolution solve_phi(const StateDiffusion& beta, const PhiAnchor& anchor, double window_lo,
                      double window_hi, std::size_t mesh);

struct MartingaleTestReport {
  std::string process;
  std::vector<double> times;
  std::vector<double> means;
  std::vector<double> ses;
  std::vector<double> z_scores;
  double reference = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_absorbed = 0;
  std::vector<std::string> flags;
  bool verdict = false;
};

inline constexpr double kZScoreBand = 3.0;

double z_score(double mean, double se, double reference);

// Stopped U_t = exp(-sigma^2 int_0^{t^tau} h^2) phi(Z_{t^tau}) against phi(z0).
MartingaleTestReport martingale_check_U(const ReferenceModel& model, double sigma,
                                        std::span<const double> times, const SimConfig& cfg);

// Stopped V_t = phi(Z_{t^tau}) - sigma^2 int_0^{t^tau} h^2 phi(Z_s) ds (trapezoid).
MartingaleTestReport martingale_check_V(const ReferenceModel& model, double sigma,
                                        std::span<const double> times, const SimConfig& cfg);

// Both reports from one ensemble; U first, V second.
std::pair<MartingaleTestReport, MartingaleTestReport> martingale_check_UV(
    const ReferenceModel& model, double sigma, std::span<const double> times,
    const SimConfig& cfg);

struct ConvexTestFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> left_derivative;
  double growth = 1.0;  // |g(z)| <= growth * (1 + |z|)
};

ConvexTestFunction linear_function();
ConvexTestFunction abs_centered(double center);
ConvexTestFunction call_payoff(double strike);

// Left-point sum of g'_-(Z_{s_i}) (Z_{s_{i+1}} - Z_{s_i}) against 0.
MartingaleTestReport martingale_check_integral(const ReferenceModel& model,
                                               const ConvexTestFunction& g, double sigma,
                                               std::span<const double> times,
                                               const SimConfig& cfg);

// E[phi(Z_t)] against exp(sigma^2 t) phi(z0); requires h == 1.
MartingaleTestReport semigroup_check(const ReferenceModel& model, double sigma,
                                     std::span<const double> times, const SimConfig& cfg);

}  // namespace volbound
