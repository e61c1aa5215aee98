#pragma once

namespace volbound {

struct AccuracySpec {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;

  AccuracySpec() = default;
  AccuracySpec(double rel, double abs);
};

// Standard normal distribution function. Throws DomainError on NaN/inf.
double norm_cdf(double x);
double norm_pdf(double x);

enum class BesselOrder { k0 = 0, k1 = 1 };

// Modified Bessel function of the second kind K_0 / K_1 for x > 0.
//
// Three regimes:
//   x <= 2            ascending series around the logarithmic singularity
//   2 < x < 25        Steed's continued fraction (Temme's CF2)
//   x >= 25           Hankel asymptotic expansion, truncated at its smallest term
double bessel_k(BesselOrder order, double x);
double bessel_k(int order, double x);

inline constexpr double kBesselSeriesCrossover = 2.0;
inline constexpr double kBesselAsymptoticCrossover = 25.0;

}  // namespace volbound
