#pragma once

#include <functional>

namespace volbound::quad {

using Integrand = std::function<double(double)>;

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

// Globally adaptive 7/15-point Gauss-Kronrod on a finite interval.
// Stops when the summed error estimate is below max(abs_tol, rel_tol*|I|).
QuadResult gauss_kronrod(const Integrand& f, double a, double b, double rel_tol = 1e-13,
                         double abs_tol = 1e-15, int max_intervals = 4000);

// Recursive adaptive Simpson with Richardson correction. Refines until two
// successive estimates on a panel agree to rel_tol (relative to the panel
// estimate) or abs_tol.
QuadResult adaptive_simpson(const Integrand& f, double a, double b, double rel_tol = 1e-8,
                            double abs_tol = 1e-14, int max_depth = 40);

}  // namespace volbound::quad
