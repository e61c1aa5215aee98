#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volbound/reference_models.hpp"

namespace volbound {

// T_1 < ... < T_q with q >= 3.
class MaturityGrid {
 public:
  explicit MaturityGrid(std::vector<double> times);
  const std::vector<double>& times() const { return times_; }
  std::size_t q() const { return times_.size(); }
  double front() const { return times_.front(); }

 private:
  std::vector<double> times_;
};

// 0 = K_0 < K_1 < ... < K_m.
class StrikeGrid {
 public:
  explicit StrikeGrid(std::vector<double> strikes);
  const std::vector<double>& strikes() const { return strikes_; }
  std::size_t m() const { return strikes_.size() - 1; }
  double k_max() const { return strikes_.back(); }

 private:
  std::vector<double> strikes_;
};

// (p_3, ..., p_q): non-negative, not all zero.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> weights);
  static WeightVector unweighted(std::size_t q);
  const std::vector<double>& weights() const { return p_; }

 private:
  std::vector<double> p_;
};

// Q(x) = sum_k p_k x^{alpha_k}, convex on (0, inf), nil and minimal at x0.
struct QPolynomial {
  std::vector<double> alphas;  // alpha_1 = 0, alpha_2 = 1, ...
  std::vector<double> coeffs;  // p_1, ..., p_q
  double x0 = 1.0;

  // Grouped form sum_{k>=3} p_k x0^a [ (x/x0)^a - a (x/x0) + a - 1 ]; exactly 0 at x0.
  double operator()(double x) const;
  double deriv1(double x) const;
  double deriv2(double x) const;
  // Direct power sum, for cross-checking the grouped form.
  double expanded(double x) const;
  double abs_coeff_sum() const;
};

std::vector<double> compute_alphas(const MaturityGrid& mats, const TimeWeight& h);

QPolynomial build_q(const WeightVector& w, std::span<const double> alphas, double x0);

// X = exp(theta^2 int_{T1}^{T2} h^2).
double x_value(double theta, const MaturityGrid& mats, const TimeWeight& h);

// N_{t,T} = exp(theta^2 int_t^T h^2) phi(s).
double n_value(double t, double T, double theta, double s, const ReferenceModel& model);

// phi_hat(b, x) = (phi(x) - phi(b)) 1{x > b}.
double phi_hat(const PhiFunction& phi, double b, double x);

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Serial nested simulation from (t, s) with volatility theta; returns the
// sample mean of f(Z_T).
Estimate inner_expectation(const ReferenceModel& model, double theta, double s, double t,
                           double T, double dt, std::size_t n_paths, RngStream& rng,
                           const std::function<double(double)>& f);

// G_{t,T} = E[phi_hat(K_m, Z_T) | Z_t = s] at volatility theta. Lognormal
// quadrature for gbm, nested Monte Carlo otherwise (stream from `rng`, or
// substream (cfg.seed, G-key) when absent).
Estimate g_value(double t, double T, double theta, double s, double k_max,
                 const ReferenceModel& model, const SimConfig& cfg, RngStream* rng = nullptr);

// Per-interval terms of L_{t,T} = sum_j int_{K_j}^{K_{j+1}} (C(K) - C(K_j)) phi''(K) dK.
struct LValue {
  double value = 0.0;
  double se = 0.0;
  std::vector<double> terms;
  double band = 0.0;  // sum_j dK_j dphi'_j; value lies in [-band, 0]
  // phi'(K_0) non-finite: the [K_0, K_1] term is dropped, matching the band.
  bool left_limit_convention = false;
};

// gbm: adaptive Simpson over K of quadrature call prices. Other models: the
// K-integral of the empirical (nested Monte-Carlo) call-price curve, which is
// piecewise linear and integrated exactly. When phi'(K_0) is non-finite the
// first interval is left out, as in phi_prime_increments.
LValue l_value(double t, double T, double theta, double s, const StrikeGrid& strikes,
               const ReferenceModel& model, const SimConfig& cfg, RngStream* rng = nullptr);

// sum_j int_{K_j}^{K_{j+1}} (call(K) - call(K_j)) phi''(K) dK by adaptive Simpson.
std::vector<double> strike_integral_terms(const std::function<double(double)>& call,
                                          const StrikeGrid& strikes, const PhiFunction& phi,
                                          double rel_tol = 1e-10);

struct RhsBound {
  double value = 0.0;
  double inner_sum = 0.0;  // sum_j dK_j (phi'(K_{j+1}) - phi'(K_j))
  double abs_coeff_sum = 0.0;
  bool left_limit_convention = false;  // phi'(K_0) replaced by phi'(K_1)
};

// Increments phi'(K_{j+1}) - phi'(K_j); a non-finite phi'(K_0) is replaced by
// phi'(K_1), so the first increment is zero.
std::vector<double> phi_prime_increments(const StrikeGrid& strikes, const PhiFunction& phi,
                                         bool* convention_applied = nullptr);

RhsBound rhs_bound(std::span<const double> coeffs, const StrikeGrid& strikes,
                   const PhiFunction& phi);

enum class Generator { self_consistent, step_vol, meanrev_vol };

std::string to_string(Generator g);
Generator generator_from_string(const std::string& name);

// Candidate pair (S_t, theta_t). theta_0 = sigma and S_0 = reference.z0 by construction.
struct Scenario {
  ReferenceModel reference;
  double sigma = 0.2;
  Generator generator = Generator::self_consistent;
  // step-vol: theta = sigma before jump_time, sigma + jump_size from jump_time on.
  double jump_time = 0.25;
  double jump_size = 0.0;
  // meanrev-vol: d theta = kappa (theta_bar - theta) dt + vol_of_vol dW',
  // d<W, W'> = rho dt, Euler-stepped and reflected at zero.
  double kappa = 1.0;
  double theta_bar = 0.2;
  double vol_of_vol = 0.0;
  double rho = 0.0;

  void validate() const;
  double theta0() const { return sigma; }
  double s0() const { return reference.z0; }
};

struct JointEnsemble {
  std::vector<double> times;
  std::vector<double> s;      // n_paths x times
  std::vector<double> theta;  // n_paths x times
  std::vector<unsigned char> absorbed;

  std::size_t n_paths() const { return absorbed.size(); }
  std::size_t index_of(double t) const;
  double s_at(std::size_t p, std::size_t i) const { return s[p * times.size() + i]; }
  double theta_at(std::size_t p, std::size_t i) const { return theta[p * times.size() + i]; }
};

JointEnsemble joint_simulate(const Scenario& scn, std::span<const double> time_grid,
                             const SimConfig& cfg);

struct ResidualCell {
  double t = 0.0;
  double maturity = 0.0;
  double strike = 0.0;
  double mean_payoff = 0.0;
  double mean_model_price = 0.0;
  double residual = 0.0;
  double se = 0.0;
  double z = 0.0;
  std::size_t n_exercised = 0;  // paths with a positive payoff
  bool testable = true;         // n_exercised >= kMinExercisedPaths
};

// Below this many in-the-money paths the paired standard error is unreliable
// and the cell is reported but left out of the consistency verdict.
inline constexpr std::size_t kMinExercisedPaths = 30;

struct ResidualTable {
  std::vector<ResidualCell> cells;
  double max_abs_z = 0.0;  // over testable cells
  bool consistent = true;  // all testable |z| <= 3
};

ResidualTable pricing_residuals(const Scenario& scn, const MaturityGrid& mats,
                                const StrikeGrid& strikes, std::span<const double> times,
                                const SimConfig& cfg);

struct LDiagnostic {
  double maturity = 0.0;
  double l_at_zero = 0.0;
  double mean_l_at_t = 0.0;
  double se_l_at_t = 0.0;
  double band = 0.0;
  std::size_t n_paths = 0;
};

struct BoundReport {
  double t = 0.0;
  double x0 = 1.0;
  QPolynomial q;
  double enq = 0.0;  // E[N_{t,T1} Q(X_t)]
  double enq_se = 0.0;
  double g_correction = 0.0;  // sum_k p_k E[G_{0,T_k} - G_{t,T_k}]
  double g_correction_se = 0.0;
  std::vector<double> g_at_zero;
  double lhs_signed = 0.0;
  double lhs = 0.0;
  double lhs_se = 0.0;
  RhsBound rhs;
  bool satisfied = false;
  std::vector<LDiagnostic> l_diagnostics;
  double l_side = 0.0;  // sum_k p_k (E[L_{t,T_k}] - L_{0,T_k}); equals lhs_signed under the pricing identity
  double l_side_se = 0.0;
  double n_tq_mean = 0.0;  // E[N_{t,T_q}] integrability probe
  double n_tq_half_mean = 0.0;
  bool n_tq_stable = true;
  ResidualTable residuals;
  bool impossible_conjunction = false;  // residuals consistent while bound violated
  std::vector<std::string> flags;
};

struct BoundOptions {
  std::vector<double> residual_times;  // empty: {0, t}
  std::size_t l_diagnostic_paths = 200;
};

BoundReport check_bound(const Scenario& scn, const MaturityGrid& mats, const StrikeGrid& strikes,
                        const WeightVector& w, double t, const SimConfig& cfg,
                        const BoundOptions& opts = {});

struct DensifyRow {
  std::size_t step = 0;
  std::size_t n_strikes = 0;
  double k_max = 0.0;
  double diagnostic = 0.0;  // K_m * max_j dphi'_j
  double rhs = 0.0;
  std::optional<double> lhs;
  std::optional<double> lhs_se;
};

struct DensifyReport {
  std::vector<DensifyRow> rows;
  bool diagnostic_decreasing = false;
  bool rhs_nonincreasing = false;
  bool condition_satisfied = false;
};

// Uniform grids with K_m = n^exponent and spacing K_m / n.
std::vector<StrikeGrid> uniform_schedule(std::span<const std::size_t> ns, double exponent);

double densification_diagnostic(const StrikeGrid& strikes, const PhiFunction& phi);

// With `lhs_cfg`, also evaluates the bound LHS on the self-consistent scenario.
DensifyReport densification_study(const ReferenceModel& model, double sigma,
                                  const MaturityGrid& mats, const WeightVector& w,
                                  std::span<const StrikeGrid> schedule,
                                  const std::optional<SimConfig>& lhs_cfg = std::nullopt,
                                  double t = 0.5);

// Split of D = M - N for a given conditional law of S_T
// and the reference law of Z_T, both supplied as pricing functionals.
struct ConditionalLaw {
  std::function<double(double)> call;  // K -> E[(X - K)+]
  // (f, x_lo) -> E[f(X) 1{X > x_lo}]
  std::function<double(const std::function<double(double)>&, double)> expect;
};

struct DecompositionTerms {
  double m = 0.0;
  double n = 0.0;
  double h = 0.0;
  double l = 0.0;
  double g = 0.0;
  double price_mismatch = 0.0;  // zero when S matches the strike prices

  double d() const { return m - n; }
  double split() const { return h - l - g + price_mismatch; }
};

DecompositionTerms decompose(const ConditionalLaw& s_law, const ConditionalLaw& z_law,
                             double n_value, const StrikeGrid& strikes, const PhiFunction& phi);

// Conditional law of a gbm terminal value with the given total variance.
ConditionalLaw lognormal_law(double z, double total_var);

}  // namespace volbound
