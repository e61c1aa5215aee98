#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "volbound/reference_models.hpp"

namespace volbound {

struct PriceQuote {
  double value = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
};

struct ImpliedVolResult {
  double sigma = 0.0;
  int iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double residual = 0.0;
  std::string forward_map;
};

// Black-Scholes call with unit time weight.
PriceQuote bs_call_price(double t, double T, double K, double sigma, double z);

// Black-Scholes call in terms of the total standard deviation sigma*sqrt(int h^2).
double bs_call_total_sd(double z, double K, double total_sd);
// d C / d total_sd.
double bs_vega_total_sd(double z, double K, double total_sd);

// Closed-form price under the reference model; only gbm has one.
PriceQuote model_call_price(const ReferenceModel& model, double sigma, double t, double T,
                            double K, double z);

PriceQuote mc_call_price(const ReferenceModel& model, double sigma, double t, double T, double K,
                         double z, const SimConfig& cfg);

// E[f(Z_T) 1{Z_T > x_lo} | Z_t = z] for gbm with total variance `total_var`,
// by adaptive Gauss-Kronrod in the Gaussian coordinate. `window` bounds the
// integration range to [-window, sqrt(total_var) + window].
double lognormal_expectation(const std::function<double(double)>& f, double z, double total_var,
                             double x_lo = 0.0, double window = 12.0);

PriceQuote quad_call_price(const ReferenceModel& model, double sigma, double t, double T,
                           double K, double z, double window = 12.0);

struct ImpliedVolOptions {
  double tol = 1e-10;
  double bracket_lo = 1e-4;
  double bracket_hi = 5.0;
  int max_iterations = 200;
};

// Inverts the model's noise-free forward map C(T, t, K, sigma, z) = price.
ImpliedVolResult implied_vol(const ReferenceModel& model, double price, double t, double T,
                             double K, double z, const ImpliedVolOptions& opts = {});

}  // namespace volbound
