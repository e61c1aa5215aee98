#include "volbound/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "volbound/errors.hpp"
#include "volbound/quadrature.hpp"
#include "volbound/special_functions.hpp"

namespace volbound {

namespace {

void check_call_inputs(double t, double T, double K, double sigma, double z) {
  if (!(T >= t)) throw DomainError("call price: maturity precedes valuation time");
  if (!(K >= 0.0)) throw DomainError("call price: strike must be non-negative");
  if (!(z >= 0.0)) throw DomainError("call price: spot must be non-negative");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw DomainError("call price: sigma must be finite and non-negative");
  }
}

double intrinsic(double z, double K) { return std::max(z - K, 0.0); }

}  // namespace

double bs_call_total_sd(double z, double K, double total_sd) {
  if (K == 0.0) return z;
  if (z == 0.0) return 0.0;
  if (total_sd == 0.0) return intrinsic(z, K);
  const double eta = (std::log(z / K) + 0.5 * total_sd * total_sd) / total_sd;
  const double value = z * norm_cdf(eta) - K * norm_cdf(eta - total_sd);
  return std::max(value, intrinsic(z, K));
}

double bs_vega_total_sd(double z, double K, double total_sd) {
  if (K == 0.0 || z == 0.0 || total_sd == 0.0) return 0.0;
  const double eta = (std::log(z / K) + 0.5 * total_sd * total_sd) / total_sd;
  return z * norm_pdf(eta);
}

PriceQuote bs_call_price(double t, double T, double K, double sigma, double z) {
  check_call_inputs(t, T, K, sigma, z);
  return {bs_call_total_sd(z, K, sigma * std::sqrt(T - t)), 0.0, 0};
}

PriceQuote model_call_price(const ReferenceModel& model, double sigma, double t, double T,
                            double K, double z) {
  check_call_inputs(t, T, K, sigma, z);
  if (!model.has_lognormal_transition()) {
    throw ConfigError("no closed-form call price for model '" + model.name + "'");
  }
  return {bs_call_total_sd(z, K, sigma * std::sqrt(model.h.sq_integral(t, T))), 0.0, 0};
}

PriceQuote mc_call_price(const ReferenceModel& model, double sigma, double t, double T, double K,
                         double z, const SimConfig& cfg) {
  check_call_inputs(t, T, K, sigma, z);
  if (T == t) return {intrinsic(z, K), 0.0, cfg.n_paths};
  const std::vector<double> grid{t, T};
  std::vector<double> payoff(cfg.n_paths);
  simulate_paths(model, sigma, z, t, grid, cfg, [&](std::size_t p, const FinePath& path) {
    payoff[p] = intrinsic(path.states.back(), K);
  });
  const MeanSe ms = mean_se(payoff);
  return {ms.mean, ms.se, cfg.n_paths};
}

double lognormal_expectation(const std::function<double(double)>& f, double z, double total_var,
                             double x_lo, double window) {
  if (total_var == 0.0) return z > x_lo ? f(z) : 0.0;
  const double sd = std::sqrt(total_var);
  double w_lo = -window;
  if (x_lo > 0.0) w_lo = std::max(w_lo, (std::log(x_lo / z) + 0.5 * total_var) / sd);
  const double w_hi = sd + window;
  if (w_lo >= w_hi) return 0.0;
  const auto integrand = [&](double w) {
    return f(z * std::exp(sd * w - 0.5 * total_var)) * norm_pdf(w);
  };
  return quad::gauss_kronrod(integrand, w_lo, w_hi, 1e-14, 1e-300).value;
}

PriceQuote quad_call_price(const ReferenceModel& model, double sigma, double t, double T,
                           double K, double z, double window) {
  check_call_inputs(t, T, K, sigma, z);
  if (!model.has_lognormal_transition()) {
    throw ConfigError("quad_call_price: no transition density available for model '" +
                      model.name + "'");
  }
  const double var = sigma * sigma * model.h.sq_integral(t, T);
  if (var == 0.0 || z == 0.0) return {intrinsic(z, K), 0.0, 0};
  const double value =
      lognormal_expectation([K](double x) { return std::max(x - K, 0.0); }, z, var, K, window);
  return {value, 0.0, 0};
}

ImpliedVolResult implied_vol(const ReferenceModel& model, double price, double t, double T,
                             double K, double z, const ImpliedVolOptions& opts) {
  check_call_inputs(t, T, K, 0.0, z);
  if (!model.has_lognormal_transition()) {
    throw ConfigError("implied_vol: model '" + model.name +
                      "' has no noise-free forward map (only gbm is supported)");
  }
  if (!(price > intrinsic(z, K)) || !(price < z)) {
    throw DomainError("implied_vol: price outside the no-arbitrage interval ((z-K)+, z)");
  }
  if (!(T > t)) throw DomainError("implied_vol: zero time to maturity");
  const double root_h = std::sqrt(model.h.sq_integral(t, T));
  const auto excess = [&](double s) { return bs_call_total_sd(z, K, s * root_h) - price; };

  ImpliedVolResult out;
  out.forward_map = "closed-form(" + model.name + ")";
  double lo = opts.bracket_lo;
  double hi = opts.bracket_hi;
  double f_lo = excess(lo);
  double f_hi = excess(hi);
  while (f_lo > 0.0 && lo > 1e-12) {
    lo *= 0.1;
    f_lo = excess(lo);
  }
  while (f_hi < 0.0 && hi < 1e6) {
    hi *= 2.0;
    f_hi = excess(hi);
  }
  if (!(f_lo <= 0.0 && f_hi >= 0.0)) {
    throw SearchError("implied_vol: could not bracket the root");
  }
  out.bracket_lo = lo;
  out.bracket_hi = hi;

  double s = 0.5 * (lo + hi);
  double f = excess(s);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (f == 0.0) break;
    if (f > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    const double vega = bs_vega_total_sd(z, K, s * root_h) * root_h;
    double next = vega > 0.0 ? s - f / vega : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - s);
    s = next;
    f = excess(s);
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * s ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * s) {
      break;
    }
  }
  out.sigma = s;
  out.iterations = it + 1;
  out.residual = f;
  if (!(std::abs(f) <= opts.tol)) {
    throw SearchError("implied_vol: residual " + std::to_string(f) + " above tolerance");
  }
  return out;
}

}  // namespace volbound
