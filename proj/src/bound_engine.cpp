#include "volbound/bound_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "volbound/errors.hpp"
#include "volbound/parallel.hpp"
#include "volbound/phi_engine.hpp"
#include "volbound/pricing.hpp"
#include "volbound/quadrature.hpp"

namespace volbound {

namespace {

// Seeds for nested simulations, disjoint from the outer block streams.
constexpr std::uint64_t kInnerPurpose = 0x5bd1e995a4f1c3b7ULL;
constexpr std::uint64_t kAnchorPurpose = 0x2545f4914f6cdd1dULL;

std::uint64_t purpose_seed(std::uint64_t seed, std::uint64_t purpose) {
  return splitmix64(seed ^ purpose);
}

void require_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw DomainError(std::string(what) + ": non-finite entry");
    if (i > 0 && !(v[i] > v[i - 1])) {
      throw DomainError(std::string(what) + ": entries must be strictly increasing");
    }
  }
}

}  // namespace

MaturityGrid::MaturityGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.size() < 3) {
    throw DomainError("MaturityGrid: the bound needs q >= 3 maturities, got " +
                      std::to_string(times_.size()));
  }
  require_increasing(times_, "MaturityGrid");
}

StrikeGrid::StrikeGrid(std::vector<double> strikes) : strikes_(std::move(strikes)) {
  if (strikes_.size() < 2) throw DomainError("StrikeGrid: need K_0 = 0 and at least one more strike");
  if (strikes_.front() != 0.0) throw DomainError("StrikeGrid: first strike must be exactly 0");
  require_increasing(strikes_, "StrikeGrid");
}

WeightVector::WeightVector(std::vector<double> weights) : p_(std::move(weights)) {
  if (p_.empty()) throw DomainError("WeightVector: empty");
  bool any_positive = false;
  for (double p : p_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("WeightVector: weights must be finite and non-negative");
    }
    any_positive = any_positive || p > 0.0;
  }
  if (!any_positive) throw DomainError("WeightVector: at least one weight must be positive");
}

WeightVector WeightVector::unweighted(std::size_t q) {
  if (q < 3) throw DomainError("WeightVector: q must be >= 3");
  return WeightVector(std::vector<double>(q - 2, 1.0));
}

double QPolynomial::operator()(double x) const {
  double total = 0.0;
  const double r = x / x0;
  const double log_r = std::log(r);
  for (std::size_t k = 2; k < alphas.size(); ++k) {
    const double a = alphas[k];
    const double term = (std::expm1(a * log_r) - a * (r - 1.0));
    total += coeffs[k] * std::pow(x0, a) * std::max(term, 0.0);
  }
  return total;
}

double QPolynomial::deriv1(double x) const {
  double total = 0.0;
  const double log_r = std::log(x / x0);
  for (std::size_t k = 2; k < alphas.size(); ++k) {
    const double a = alphas[k];
    total += coeffs[k] * a * std::pow(x0, a - 1.0) * std::expm1((a - 1.0) * log_r);
  }
  return total;
}

double QPolynomial::deriv2(double x) const {
  double total = 0.0;
  for (std::size_t k = 2; k < alphas.size(); ++k) {
    const double a = alphas[k];
    total += coeffs[k] * a * (a - 1.0) * std::pow(x, a - 2.0);
  }
  return total;
}

double QPolynomial::expanded(double x) const {
  double total = 0.0;
  for (std::size_t k = 0; k < alphas.size(); ++k) total += coeffs[k] * std::pow(x, alphas[k]);
  return total;
}

double QPolynomial::abs_coeff_sum() const {
  return std::accumulate(coeffs.begin(), coeffs.end(), 0.0,
                         [](double acc, double p) { return acc + std::abs(p); });
}

std::vector<double> compute_alphas(const MaturityGrid& mats, const TimeWeight& h) {
  const auto& T = mats.times();
  const double base = h.sq_integral(T[0], T[1]);
  if (!(base > 0.0)) throw DomainError("compute_alphas: degenerate first maturity interval");
  std::vector<double> alphas(T.size());
  alphas[0] = 0.0;
  alphas[1] = 1.0;
  for (std::size_t k = 2; k < T.size(); ++k) alphas[k] = h.sq_integral(T[0], T[k]) / base;
  for (std::size_t k = 1; k < alphas.size(); ++k) {
    if (!(alphas[k] > alphas[k - 1])) throw DomainError("compute_alphas: alphas not increasing");
  }
  return alphas;
}

QPolynomial build_q(const WeightVector& w, std::span<const double> alphas, double x0) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("build_q: x0 must be positive");
  const auto& p = w.weights();
  if (alphas.size() != p.size() + 2) {
    throw DomainError("build_q: expected " + std::to_string(alphas.size() - 2) +
                      " weights (p_3..p_q), got " + std::to_string(p.size()));
  }
  if (alphas[0] != 0.0 || alphas[1] != 1.0) throw DomainError("build_q: need alpha_1 = 0, alpha_2 = 1");
  QPolynomial q;
  q.alphas.assign(alphas.begin(), alphas.end());
  q.x0 = x0;
  q.coeffs.assign(alphas.size(), 0.0);
  double p2 = 0.0;
  for (std::size_t k = 2; k < alphas.size(); ++k) {
    q.coeffs[k] = p[k - 2];
    p2 -= p[k - 2] * alphas[k] * std::pow(x0, alphas[k] - 1.0);
  }
  q.coeffs[1] = p2;
  double p1 = 0.0;
  for (std::size_t k = 1; k < alphas.size(); ++k) p1 -= q.coeffs[k] * std::pow(x0, alphas[k]);
  q.coeffs[0] = p1;
  return q;
}

double x_value(double theta, const MaturityGrid& mats, const TimeWeight& h) {
  return std::exp(theta * theta * h.sq_integral(mats.times()[0], mats.times()[1]));
}

double n_value(double t, double T, double theta, double s, const ReferenceModel& model) {
  if (!(t <= T)) throw DomainError("n_value: t must not exceed T");
  return std::exp(theta * theta * model.h.sq_integral(t, T)) * model.phi.value(s);
}

double phi_hat(const PhiFunction& phi, double b, double x) {
  return x > b ? phi.value(x) - phi.value(b) : 0.0;
}

namespace {

// Terminal samples of Z at each of `maturities` (all >= t), from one nested ensemble.
std::vector<std::vector<double>> inner_terminal_samples(const ReferenceModel& model, double theta,
                                                        double s, double t,
                                                        std::span<const double> maturities,
                                                        double dt, std::size_t n_paths,
                                                        RngStream& rng) {
  std::vector<double> grid{t};
  for (double T : maturities) {
    if (T > grid.back()) grid.push_back(T);
  }
  std::vector<std::vector<double>> out(maturities.size(), std::vector<double>(n_paths));
  const StepGrid sg = make_step_grid(model.h, t, grid, dt);
  const PathStepper stepper(model, Scheme::euler_maruyama);
  const bool starts_absorbed = !model.beta.in_interior(s);
  std::vector<double> at_grid(grid.size());
  for (std::size_t p = 0; p < n_paths; ++p) {
    double z = s;
    bool absorbed = starts_absorbed;
    at_grid[0] = z;
    std::size_t rec = 1;
    for (std::size_t k = 0; k < sg.n_steps(); ++k) {
      z = stepper.step(z, theta, sg.h_sq[k], rng.normal(), absorbed);
      if (rec < grid.size() && sg.record_index[rec] == k + 1) at_grid[rec++] = z;
    }
    for (std::size_t i = 0; i < maturities.size(); ++i) {
      const auto it = std::lower_bound(grid.begin(), grid.end(), maturities[i]);
      out[i][p] = at_grid[static_cast<std::size_t>(it - grid.begin())];
    }
  }
  return out;
}

Estimate estimate_of(std::span<const double> values) {
  const MeanSe ms = mean_se(values);
  return {ms.mean, ms.se};
}

}  // namespace

Estimate inner_expectation(const ReferenceModel& model, double theta, double s, double t,
                           double T, double dt, std::size_t n_paths, RngStream& rng,
                           const std::function<double(double)>& f) {
  if (T == t) return {f(s), 0.0};
  const std::vector<double> mats{T};
  const auto samples = inner_terminal_samples(model, theta, s, t, mats, dt, n_paths, rng);
  std::vector<double> values(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) values[p] = f(samples[0][p]);
  return estimate_of(values);
}

Estimate g_value(double t, double T, double theta, double s, double k_max,
                 const ReferenceModel& model, const SimConfig& cfg, RngStream* rng) {
  if (!(t <= T)) throw DomainError("g_value: t must not exceed T");
  if (model.has_lognormal_transition()) {
    const double var = theta * theta * model.h.sq_integral(t, T);
    const double base = model.phi.value(k_max);
    return {lognormal_expectation([&](double x) { return model.phi.value(x) - base; }, s, var,
                                  k_max),
            0.0};
  }
  RngStream fallback(purpose_seed(cfg.seed, kAnchorPurpose), 0);
  RngStream& stream = rng ? *rng : fallback;
  return inner_expectation(model, theta, s, t, T, cfg.dt, cfg.inner_paths, stream,
                           [&](double x) { return phi_hat(model.phi, k_max, x); });
}

std::vector<double> strike_integral_terms(const std::function<double(double)>& call,
                                          const StrikeGrid& strikes, const PhiFunction& phi,
                                          double rel_tol) {
  const auto& K = strikes.strikes();
  std::vector<double> terms(strikes.m());
  for (std::size_t j = 0; j < strikes.m(); ++j) {
    const double kj = K[j];
    const double base = call(kj);
    const auto integrand = [&](double k) {
      if (k <= kj) return 0.0;
      return (call(k) - base) * phi.deriv2(k);
    };
    terms[j] = quad::adaptive_simpson(integrand, kj, K[j + 1], rel_tol, 1e-15, 30).value;
  }
  return terms;
}

std::vector<double> phi_prime_increments(const StrikeGrid& strikes, const PhiFunction& phi,
                                         bool* convention_applied) {
  const auto& K = strikes.strikes();
  std::vector<double> d(K.size());
  for (std::size_t j = 0; j < K.size(); ++j) d[j] = phi.deriv1(K[j]);
  bool convention = false;
  if (!std::isfinite(d[0])) {
    d[0] = d[1];
    convention = true;
  }
  if (convention_applied) *convention_applied = convention;
  std::vector<double> inc(strikes.m());
  for (std::size_t j = 0; j < inc.size(); ++j) inc[j] = d[j + 1] - d[j];
  return inc;
}

namespace {

// lambda_j(x) = 1{x > K_j} [phi(y) - phi(K_j) - (y - K_j) phi'(K_{j+1})], y = min(x, K_{j+1}):
// the exact K-integral of ((x-K)+ - (x-K_j)+) phi''(K) over [K_j, K_{j+1}].
double lambda_term(const PhiFunction& phi, double kj, double kj1, double dphi_kj1, double x) {
  if (x <= kj) return 0.0;
  const double y = std::min(x, kj1);
  return phi.value(y) - phi.value(kj) - (y - kj) * dphi_kj1;
}

LValue l_from_samples(std::span<const double> samples, const StrikeGrid& strikes,
                      const PhiFunction& phi, std::size_t first) {
  const auto& K = strikes.strikes();
  const std::size_t m = strikes.m();
  std::vector<double> dphi(m);
  for (std::size_t j = 0; j < m; ++j) dphi[j] = phi.deriv1(K[j + 1]);
  LValue out;
  out.terms.assign(m, 0.0);
  std::vector<double> per_sample(samples.size(), 0.0);
  for (std::size_t p = 0; p < samples.size(); ++p) {
    for (std::size_t j = first; j < m; ++j) {
      const double v = lambda_term(phi, K[j], K[j + 1], dphi[j], samples[p]);
      per_sample[p] += v;
      out.terms[j] += v;
    }
  }
  for (double& t : out.terms) t /= static_cast<double>(samples.size());
  const MeanSe ms = mean_se(per_sample);
  out.value = ms.mean;
  out.se = ms.se;
  return out;
}

double band_of(const StrikeGrid& strikes, const PhiFunction& phi) {
  const auto inc = phi_prime_increments(strikes, phi);
  const auto& K = strikes.strikes();
  double band = 0.0;
  for (std::size_t j = 0; j < inc.size(); ++j) band += (K[j + 1] - K[j]) * inc[j];
  return band;
}

}  // namespace

LValue l_value(double t, double T, double theta, double s, const StrikeGrid& strikes,
               const ReferenceModel& model, const SimConfig& cfg, RngStream* rng) {
  if (!(t <= T)) throw DomainError("l_value: t must not exceed T");
  const bool convention = !std::isfinite(model.phi.deriv1(strikes.strikes()[0]));
  LValue out;
  if (model.has_lognormal_transition()) {
    const auto call = [&](double k) { return quad_call_price(model, theta, t, T, k, s).value; };
    out.terms = strike_integral_terms(call, strikes, model.phi, 1e-8);
    if (convention) out.terms[0] = 0.0;
    out.value = std::accumulate(out.terms.begin(), out.terms.end(), 0.0);
  } else {
    RngStream fallback(purpose_seed(cfg.seed, kAnchorPurpose), 1);
    RngStream& stream = rng ? *rng : fallback;
    const std::vector<double> mats{T};
    const auto samples =
        inner_terminal_samples(model, theta, s, t, mats, cfg.dt, cfg.inner_paths, stream);
    out = l_from_samples(samples[0], strikes, model.phi, convention ? 1 : 0);
  }
  out.band = band_of(strikes, model.phi);
  out.left_limit_convention = convention;
  return out;
}

RhsBound rhs_bound(std::span<const double> coeffs, const StrikeGrid& strikes,
                   const PhiFunction& phi) {
  RhsBound out;
  const auto inc = phi_prime_increments(strikes, phi, &out.left_limit_convention);
  const auto& K = strikes.strikes();
  for (std::size_t j = 0; j < inc.size(); ++j) out.inner_sum += (K[j + 1] - K[j]) * inc[j];
  for (double p : coeffs) out.abs_coeff_sum += std::abs(p);
  out.value = 2.0 * out.abs_coeff_sum * out.inner_sum;
  return out;
}

std::string to_string(Generator g) {
  switch (g) {
    case Generator::self_consistent: return "self-consistent";
    case Generator::step_vol: return "step-vol";
    case Generator::meanrev_vol: return "meanrev-vol";
  }
  return "self-consistent";
}

Generator generator_from_string(const std::string& name) {
  if (name == "self-consistent") return Generator::self_consistent;
  if (name == "step-vol") return Generator::step_vol;
  if (name == "meanrev-vol") return Generator::meanrev_vol;
  throw ConfigError("unknown scenario generator '" + name +
                    "' (expected self-consistent, step-vol or meanrev-vol)");
}

void Scenario::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("scenario: sigma must be positive");
  if (!reference.beta.in_interior(reference.z0)) {
    throw ConfigError("scenario: z0 outside the open domain of '" + reference.name + "'");
  }
  if (generator == Generator::step_vol) {
    if (!(jump_time >= 0.0)) throw ConfigError("scenario: jump_time must be non-negative");
    if (!(sigma + jump_size >= 0.0)) throw ConfigError("scenario: sigma + jump_size must be >= 0");
  }
  if (generator == Generator::meanrev_vol) {
    if (!(kappa >= 0.0) || !(vol_of_vol >= 0.0)) {
      throw ConfigError("scenario: kappa and vol_of_vol must be non-negative");
    }
    if (!(rho >= -1.0 && rho <= 1.0)) throw ConfigError("scenario: rho must lie in [-1, 1]");
  }
}

std::size_t JointEnsemble::index_of(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t) {
    throw DomainError("joint ensemble has no record at t = " + std::to_string(t));
  }
  return static_cast<std::size_t>(it - times.begin());
}

JointEnsemble joint_simulate(const Scenario& scn, std::span<const double> time_grid,
                             const SimConfig& cfg) {
  scn.validate();
  cfg.validate();
  if (time_grid.empty() || time_grid.front() != 0.0) {
    throw DomainError("joint_simulate: time grid must start at 0");
  }
  const ReferenceModel& model = scn.reference;
  std::vector<double> sim_times(time_grid.begin(), time_grid.end());
  if (scn.generator == Generator::step_vol && scn.jump_time > 0.0 &&
      scn.jump_time < sim_times.back() &&
      !std::binary_search(sim_times.begin(), sim_times.end(), scn.jump_time)) {
    sim_times.insert(std::upper_bound(sim_times.begin(), sim_times.end(), scn.jump_time),
                     scn.jump_time);
  }
  const StepGrid sg = make_step_grid(model.h, 0.0, sim_times, cfg.dt);
  std::vector<std::size_t> record;  // fine index of each user time
  for (double t : time_grid) {
    const auto it = std::lower_bound(sim_times.begin(), sim_times.end(), t);
    record.push_back(sg.record_index[static_cast<std::size_t>(it - sim_times.begin())]);
  }
  const PathStepper stepper(model, cfg.scheme);

  JointEnsemble out;
  out.times.assign(time_grid.begin(), time_grid.end());
  const std::size_t n_rec = out.times.size();
  out.s.assign(cfg.n_paths * n_rec, 0.0);
  out.theta.assign(cfg.n_paths * n_rec, 0.0);
  out.absorbed.assign(cfg.n_paths, 0);

  const auto step_theta = [&](double t) {
    return t < scn.jump_time ? scn.sigma : scn.sigma + scn.jump_size;
  };
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - scn.rho * scn.rho));
  const std::size_t n_blocks = (cfg.n_paths + kPathsPerBlock - 1) / kPathsPerBlock;
  parallel_blocks(n_blocks, cfg.resolved_workers(), [&](std::size_t block) {
    RngStream rng = rng_substream(cfg.seed, block);
    const std::size_t first = block * kPathsPerBlock;
    const std::size_t last = std::min(cfg.n_paths, first + kPathsPerBlock);
    for (std::size_t p = first; p < last; ++p) {
      double s = model.z0;
      double theta = scn.sigma;
      bool absorbed = false;
      std::size_t rec = 0;
      const auto store = [&](std::size_t fine) {
        while (rec < n_rec && record[rec] == fine) {
          const double th = scn.generator == Generator::step_vol ? step_theta(out.times[rec]) : theta;
          out.s[p * n_rec + rec] = s;
          out.theta[p * n_rec + rec] = th;
          ++rec;
        }
      };
      store(0);
      for (std::size_t k = 0; k < sg.n_steps(); ++k) {
        const double t0 = sg.times[k];
        const double n1 = rng.normal();
        double step_vol = theta;
        if (scn.generator == Generator::step_vol) step_vol = step_theta(t0);
        s = stepper.step(s, step_vol, sg.h_sq[k], n1, absorbed);
        if (scn.generator == Generator::meanrev_vol) {
          const double n2 = rng.normal();
          const double dt = sg.times[k + 1] - t0;
          theta += scn.kappa * (scn.theta_bar - theta) * dt +
                   scn.vol_of_vol * std::sqrt(dt) * (scn.rho * n1 + rho_c * n2);
          theta = std::abs(theta);  // reflected at zero
        }
        store(k + 1);
      }
      out.absorbed[p] = absorbed ? 1 : 0;
    }
  });
  return out;
}

namespace {

std::vector<double> residual_times_for(double t, const std::vector<double>& requested) {
  std::vector<double> times = requested.empty() ? std::vector<double>{0.0, t} : requested;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::vector<double> union_grid(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> grid{0.0};
  for (auto part : parts) grid.insert(grid.end(), part.begin(), part.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

ResidualTable residuals_from(const Scenario& scn, const JointEnsemble& ens,
                             const MaturityGrid& mats, const StrikeGrid& strikes,
                             std::span<const double> times, const SimConfig& cfg) {
  const ReferenceModel& model = scn.reference;
  const auto& T = mats.times();
  const auto& K = strikes.strikes();
  const std::size_t n = ens.n_paths();
  ResidualTable table;
  for (double t : times) {
    if (t > T.front()) throw DomainError("pricing_residuals: t must not exceed T_1");
    const std::size_t it = ens.index_of(t);
    // model_price[i][j][p]
    std::vector<std::vector<std::vector<double>>> price(
        T.size(), std::vector<std::vector<double>>(K.size(), std::vector<double>(n)));
    if (model.has_lognormal_transition()) {
      for (std::size_t p = 0; p < n; ++p) {
        const double th = ens.theta_at(p, it);
        const double s = ens.s_at(p, it);
        for (std::size_t i = 0; i < T.size(); ++i) {
          const double sd = th * std::sqrt(model.h.sq_integral(t, T[i]));
          for (std::size_t j = 0; j < K.size(); ++j) price[i][j][p] = bs_call_total_sd(s, K[j], sd);
        }
      }
    } else {
      const bool shared = t == 0.0;
      const std::size_t inner = shared ? std::max(cfg.inner_paths, cfg.n_paths) : cfg.inner_paths;
      const auto fill = [&](std::size_t p, RngStream& rng) {
        const auto samples = inner_terminal_samples(model, ens.theta_at(p, it), ens.s_at(p, it),
                                                    t, T, cfg.dt, inner, rng);
        for (std::size_t i = 0; i < T.size(); ++i) {
          for (std::size_t j = 0; j < K.size(); ++j) {
            double acc = 0.0;
            for (double z : samples[i]) acc += std::max(z - K[j], 0.0);
            price[i][j][p] = acc / static_cast<double>(inner);
          }
        }
      };
      if (shared) {
        RngStream rng(purpose_seed(cfg.seed, kAnchorPurpose), 2);
        fill(0, rng);
        for (std::size_t i = 0; i < T.size(); ++i) {
          for (std::size_t j = 0; j < K.size(); ++j) {
            std::fill(price[i][j].begin(), price[i][j].end(), price[i][j][0]);
          }
        }
      } else {
        const std::uint64_t inner_seed = purpose_seed(cfg.seed ^ static_cast<std::uint64_t>(it),
                                                      kInnerPurpose);
        parallel_blocks((n + kPathsPerBlock - 1) / kPathsPerBlock, cfg.resolved_workers(),
                        [&](std::size_t block) {
                          const std::size_t last = std::min(n, (block + 1) * kPathsPerBlock);
                          for (std::size_t p = block * kPathsPerBlock; p < last; ++p) {
                            RngStream rng(inner_seed, p);
                            fill(p, rng);
                          }
                        });
      }
    }
    for (std::size_t i = 0; i < T.size(); ++i) {
      const std::size_t iT = ens.index_of(T[i]);
      for (std::size_t j = 0; j < K.size(); ++j) {
        std::vector<double> diff(n);
        double payoff_sum = 0.0;
        double price_sum = 0.0;
        std::size_t exercised = 0;
        for (std::size_t p = 0; p < n; ++p) {
          const double payoff = std::max(ens.s_at(p, iT) - K[j], 0.0);
          exercised += payoff > 0.0 ? 1 : 0;
          payoff_sum += payoff;
          price_sum += price[i][j][p];
          diff[p] = payoff - price[i][j][p];
        }
        const MeanSe ms = mean_se(diff);
        ResidualCell cell;
        cell.t = t;
        cell.maturity = T[i];
        cell.strike = K[j];
        cell.mean_payoff = payoff_sum / static_cast<double>(n);
        cell.mean_model_price = price_sum / static_cast<double>(n);
        cell.residual = ms.mean;
        cell.se = ms.se;
        cell.z = z_score(ms.mean, ms.se, 0.0);
        cell.n_exercised = exercised;
        cell.testable = exercised >= kMinExercisedPaths;
        if (cell.testable) {
          table.max_abs_z = std::max(table.max_abs_z, std::abs(cell.z));
          if (!(std::abs(cell.z) <= 3.0)) table.consistent = false;
        }
        table.cells.push_back(cell);
      }
    }
  }
  return table;
}

}  // namespace

ResidualTable pricing_residuals(const Scenario& scn, const MaturityGrid& mats,
                                const StrikeGrid& strikes, std::span<const double> times,
                                const SimConfig& cfg) {
  scn.validate();
  cfg.validate();
  const std::vector<double> req(times.begin(), times.end());
  const auto res_times = residual_times_for(0.0, req);
  const auto grid = union_grid({std::span<const double>(res_times), mats.times()});
  const JointEnsemble ens = joint_simulate(scn, grid, cfg);
  return residuals_from(scn, ens, mats, strikes, res_times, cfg);
}

BoundReport check_bound(const Scenario& scn, const MaturityGrid& mats, const StrikeGrid& strikes,
                        const WeightVector& w, double t, const SimConfig& cfg,
                        const BoundOptions& opts) {
  scn.validate();
  cfg.validate();
  const auto& T = mats.times();
  if (!(t >= 0.0 && t <= T.front())) throw DomainError("check_bound: need 0 <= t <= T_1");
  const ReferenceModel& model = scn.reference;
  const std::size_t q_count = mats.q();
  const double k_max = strikes.k_max();

  const auto res_times = residual_times_for(t, opts.residual_times);
  for (double rt : res_times) {
    if (rt < 0.0 || rt > T.front()) throw DomainError("check_bound: residual times must lie in [0, T_1]");
  }
  const std::vector<double> t_only{t};
  const auto grid = union_grid({std::span<const double>(t_only), std::span<const double>(res_times), T});
  const JointEnsemble ens = joint_simulate(scn, grid, cfg);
  const std::size_t n = ens.n_paths();
  const std::size_t it = ens.index_of(t);

  BoundReport rep;
  rep.t = t;
  const auto alphas = compute_alphas(mats, model.h);
  rep.x0 = x_value(scn.theta0(), mats, model.h);
  rep.q = build_q(w, alphas, rep.x0);
  const auto& p = rep.q.coeffs;
  const bool lognormal = model.has_lognormal_transition();

  // G_{0,T_k}: deterministic given (sigma, z0).
  rep.g_at_zero.assign(q_count, 0.0);
  std::vector<double> g0_se(q_count, 0.0);
  if (lognormal) {
    for (std::size_t k = 0; k < q_count; ++k) {
      rep.g_at_zero[k] = g_value(0.0, T[k], scn.theta0(), scn.s0(), k_max, model, cfg).value;
    }
  } else {
    RngStream rng(purpose_seed(cfg.seed, kAnchorPurpose), 3);
    const std::size_t inner = std::max(cfg.inner_paths, cfg.n_paths);
    const auto samples =
        inner_terminal_samples(model, scn.theta0(), scn.s0(), 0.0, T, cfg.dt, inner, rng);
    std::vector<double> vals(inner);
    for (std::size_t k = 0; k < q_count; ++k) {
      for (std::size_t i = 0; i < inner; ++i) vals[i] = phi_hat(model.phi, k_max, samples[k][i]);
      const MeanSe ms = mean_se(vals);
      rep.g_at_zero[k] = ms.mean;
      g0_se[k] = ms.se;
    }
  }
  double g0_sum = 0.0;
  double g0_var = 0.0;
  for (std::size_t k = 0; k < q_count; ++k) {
    g0_sum += p[k] * rep.g_at_zero[k];
    g0_var += p[k] * p[k] * g0_se[k] * g0_se[k];
  }

  std::vector<double> nq(n), pg(n), y(n), ntq(n);
  const double h12 = model.h.sq_integral(T[0], T[1]);
  const std::uint64_t inner_seed = purpose_seed(cfg.seed, kInnerPurpose);
  parallel_blocks((n + kPathsPerBlock - 1) / kPathsPerBlock, cfg.resolved_workers(),
                  [&](std::size_t block) {
                    const std::size_t last = std::min(n, (block + 1) * kPathsPerBlock);
                    for (std::size_t i = block * kPathsPerBlock; i < last; ++i) {
                      const double th = ens.theta_at(i, it);
                      const double s = ens.s_at(i, it);
                      const double nv = n_value(t, T[0], th, s, model);
                      const double xv = std::exp(th * th * h12);
                      nq[i] = nv * rep.q(xv);
                      ntq[i] = n_value(t, T.back(), th, s, model);
                      double g = 0.0;
                      if (lognormal) {
                        for (std::size_t k = 0; k < q_count; ++k) {
                          if (p[k] == 0.0) continue;
                          g += p[k] * g_value(t, T[k], th, s, k_max, model, cfg).value;
                        }
                      } else {
                        RngStream rng(inner_seed, i);
                        const auto samples = inner_terminal_samples(model, th, s, t, T, cfg.dt,
                                                                    cfg.inner_paths, rng);
                        for (std::size_t k = 0; k < q_count; ++k) {
                          double acc = 0.0;
                          for (double z : samples[k]) acc += phi_hat(model.phi, k_max, z);
                          g += p[k] * acc / static_cast<double>(cfg.inner_paths);
                        }
                      }
                      pg[i] = g;
                      y[i] = nq[i] - g;
                    }
                  });

  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < n && bad.size() < 5; ++i) {
    if (!std::isfinite(nq[i]) || !std::isfinite(ntq[i]) || !std::isfinite(pg[i])) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "check_bound: non-finite N, Q(X) or G on path(s)";
    for (std::size_t b : bad) msg << ' ' << b;
    throw DivergenceError(msg.str());
  }

  const MeanSe nq_ms = mean_se(nq);
  const MeanSe pg_ms = mean_se(pg);
  const MeanSe y_ms = mean_se(y);
  rep.enq = nq_ms.mean;
  rep.enq_se = nq_ms.se;
  rep.g_correction = g0_sum - pg_ms.mean;
  rep.g_correction_se = std::sqrt(pg_ms.se * pg_ms.se + g0_var);
  rep.lhs_signed = y_ms.mean + g0_sum;
  rep.lhs = std::abs(rep.lhs_signed);
  rep.lhs_se = std::sqrt(y_ms.se * y_ms.se + g0_var);
  rep.rhs = rhs_bound(p, strikes, model.phi);
  rep.satisfied = rep.lhs <= rep.rhs.value + 3.0 * rep.lhs_se;

  const MeanSe ntq_ms = mean_se(ntq);
  rep.n_tq_mean = ntq_ms.mean;
  if (n >= 4) {
    const MeanSe half = mean_se(std::span<const double>(ntq).first(n / 2));
    rep.n_tq_half_mean = half.mean;
    rep.n_tq_stable = std::abs(half.mean - ntq_ms.mean) <= 3.0 * half.se + 1e-12 * std::abs(ntq_ms.mean);
  } else {
    rep.n_tq_half_mean = ntq_ms.mean;
  }

  const std::size_t n_diag = std::min(opts.l_diagnostic_paths, n);
  if (n_diag > 0) {
    std::vector<double> side(n_diag, 0.0);
    double side_zero = 0.0;
    for (std::size_t k = 0; k < q_count; ++k) {
      if (p[k] == 0.0) continue;
      LDiagnostic diag;
      diag.maturity = T[k];
      diag.n_paths = n_diag;
      RngStream zero_rng(purpose_seed(cfg.seed, kAnchorPurpose), 16 + k);
      const LValue l0 = l_value(0.0, T[k], scn.theta0(), scn.s0(), strikes, model, cfg, &zero_rng);
      diag.l_at_zero = l0.value;
      diag.band = l0.band;
      std::vector<double> lt(n_diag);
      parallel_blocks(n_diag, cfg.resolved_workers(), [&](std::size_t i) {
        RngStream rng(purpose_seed(inner_seed ^ (k + 1), kAnchorPurpose), i);
        lt[i] = l_value(t, T[k], ens.theta_at(i, it), ens.s_at(i, it), strikes, model, cfg, &rng).value;
      });
      const MeanSe ms = mean_se(lt);
      diag.mean_l_at_t = ms.mean;
      diag.se_l_at_t = ms.se;
      for (std::size_t i = 0; i < n_diag; ++i) side[i] += p[k] * lt[i];
      side_zero += p[k] * l0.value;
      rep.l_diagnostics.push_back(diag);
    }
    const MeanSe side_ms = mean_se(side);
    rep.l_side = side_ms.mean - side_zero;
    rep.l_side_se = side_ms.se;
  }

  rep.residuals = residuals_from(scn, ens, mats, strikes, res_times, cfg);
  rep.impossible_conjunction = rep.residuals.consistent && !rep.satisfied;

  if (rep.rhs.left_limit_convention) rep.flags.push_back("phi'(K_0) non-finite; used phi'(K_1)");
  if (!rep.satisfied) rep.flags.push_back("bound violated beyond 3 standard errors");
  if (!rep.residuals.consistent) rep.flags.push_back("pricing residuals exceed 3 standard errors");
  if (!rep.n_tq_stable) rep.flags.push_back("E[N_{t,T_q}] unstable under path doubling");
  if (rep.impossible_conjunction) {
    rep.flags.push_back("pricing identity holds but bound is violated");
  }
  const auto absorbed = static_cast<std::size_t>(
      std::count(ens.absorbed.begin(), ens.absorbed.end(), static_cast<unsigned char>(1)));
  if (absorbed > 0) rep.flags.push_back(std::to_string(absorbed) + " path(s) absorbed at a boundary");
  return rep;
}

std::vector<StrikeGrid> uniform_schedule(std::span<const std::size_t> ns, double exponent) {
  std::vector<StrikeGrid> out;
  for (std::size_t n : ns) {
    if (n == 0) throw DomainError("uniform_schedule: n must be positive");
    const double k_max = std::pow(static_cast<double>(n), exponent);
    std::vector<double> k(n + 1);
    for (std::size_t j = 0; j <= n; ++j) k[j] = k_max * static_cast<double>(j) / static_cast<double>(n);
    out.emplace_back(std::move(k));
  }
  return out;
}

double densification_diagnostic(const StrikeGrid& strikes, const PhiFunction& phi) {
  const auto inc = phi_prime_increments(strikes, phi);
  return strikes.k_max() * *std::max_element(inc.begin(), inc.end());
}

DensifyReport densification_study(const ReferenceModel& model, double sigma,
                                  const MaturityGrid& mats, const WeightVector& w,
                                  std::span<const StrikeGrid> schedule,
                                  const std::optional<SimConfig>& lhs_cfg, double t) {
  if (schedule.empty()) throw DomainError("densification_study: empty schedule");
  const auto alphas = compute_alphas(mats, model.h);
  const QPolynomial q = build_q(w, alphas, x_value(sigma, mats, model.h));
  DensifyReport rep;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    DensifyRow row;
    row.step = i;
    row.n_strikes = schedule[i].m();
    row.k_max = schedule[i].k_max();
    row.diagnostic = densification_diagnostic(schedule[i], model.phi);
    row.rhs = rhs_bound(q.coeffs, schedule[i], model.phi).value;
    if (lhs_cfg) {
      Scenario scn;
      scn.reference = model;
      scn.sigma = sigma;
      BoundOptions opts;
      opts.l_diagnostic_paths = 0;
      const BoundReport br = check_bound(scn, mats, schedule[i], w, t, *lhs_cfg, opts);
      row.lhs = br.lhs;
      row.lhs_se = br.lhs_se;
    }
    rep.rows.push_back(row);
  }
  rep.diagnostic_decreasing = true;
  rep.rhs_nonincreasing = true;
  bool k_growing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    rep.diagnostic_decreasing = rep.diagnostic_decreasing && b.diagnostic < a.diagnostic;
    rep.rhs_nonincreasing = rep.rhs_nonincreasing && b.rhs <= a.rhs * (1.0 + 1e-12);
    k_growing = k_growing && b.k_max > a.k_max;
  }
  rep.condition_satisfied = rep.rows.size() > 1 && rep.diagnostic_decreasing && k_growing;
  return rep;
}

DecompositionTerms decompose(const ConditionalLaw& s_law, const ConditionalLaw& z_law,
                             double n_value, const StrikeGrid& strikes, const PhiFunction& phi) {
  const auto& K = strikes.strikes();
  const std::size_t m = strikes.m();
  const double k_max = strikes.k_max();
  const auto tail = [&](double x) { return phi.value(x) - phi.value(k_max); };
  const auto whole = [&](double x) { return phi.value(x); };

  DecompositionTerms out;
  out.n = n_value;
  out.m = s_law.expect(whole, 0.0);
  const auto hs = strike_integral_terms(s_law.call, strikes, phi, 1e-12);
  const auto ls = strike_integral_terms(z_law.call, strikes, phi, 1e-12);
  out.h = std::accumulate(hs.begin(), hs.end(), 0.0) + s_law.expect(tail, k_max);
  out.l = std::accumulate(ls.begin(), ls.end(), 0.0);
  out.g = z_law.expect(tail, k_max);

  std::vector<double> d(K.size());
  for (std::size_t j = 0; j < K.size(); ++j) d[j] = phi.deriv1(K[j]);
  for (std::size_t j = 0; j <= m; ++j) {
    double c = 0.0;
    if (j == m) {
      c = -d[m];
    } else if (j == 0) {
      c = d[1];
    } else {
      c = d[j + 1] - d[j];
    }
    out.price_mismatch += c * (s_law.call(K[j]) - z_law.call(K[j]));
  }
  return out;
}

ConditionalLaw lognormal_law(double z, double total_var) {
  ConditionalLaw law;
  law.call = [z, total_var](double k) {
    return bs_call_total_sd(z, k, std::sqrt(total_var));
  };
  law.expect = [z, total_var](const std::function<double(double)>& f, double x_lo) {
    return lognormal_expectation(f, z, total_var, x_lo);
  };
  return law;
}

}  // namespace volbound
