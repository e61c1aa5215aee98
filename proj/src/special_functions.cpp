#include "volbound/special_functions.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "volbound/errors.hpp"

namespace volbound {

AccuracySpec::AccuracySpec(double rel, double abs) : rel_tol(rel), abs_tol(abs) {
  if (!(rel > 0.0) || !(abs > 0.0)) {
    throw DomainError("AccuracySpec: tolerances must be positive");
  }
}

double norm_cdf(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("norm_cdf: non-finite argument");
  }
  // erfc keeps full relative accuracy in the lower tail.
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double norm_pdf(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("norm_pdf: non-finite argument");
  }
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

constexpr double kEps = 1e-17;

// I_0, I_1 and the harmonic-number sums of the ascending series.
// K0 = -(ln(x/2)+gamma) I0 + sum_k H_k (x^2/4)^k / (k!)^2
// K1 = 1/x + ln(x/2) I1 - (x/4) sum_k [psi(k+1)+psi(k+2)] (x^2/4)^k / (k!(k+1)!)
double k0_series(double x) {
  const double y = 0.25 * x * x;
  const double lg = std::log(0.5 * x) + std::numbers::egamma;
  double term = 1.0;
  double harmonic = 0.0;
  double i0 = 1.0;
  double tail = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= y / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term;
    tail += harmonic * term;
    if (term < kEps * i0) break;
  }
  return -lg * i0 + tail;
}

double k1_series(double x) {
  const double y = 0.25 * x * x;
  const double lhalf = std::log(0.5 * x);
  // psi(1) = -gamma, psi(2) = 1 - gamma
  double psi_a = -std::numbers::egamma;
  double psi_b = 1.0 - std::numbers::egamma;
  double term = 1.0;  // (x^2/4)^k / (k!(k+1)!)
  double i1 = 1.0;    // I1 / (x/2)
  double sum = psi_a + psi_b;
  for (int k = 1; k < 200; ++k) {
    term *= y / (static_cast<double>(k) * (k + 1));
    psi_a += 1.0 / k;
    psi_b += 1.0 / (k + 1);
    i1 += term;
    sum += (psi_a + psi_b) * term;
    if (term < kEps * i1) break;
  }
  return 1.0 / x + lhalf * (0.5 * x * i1) - 0.25 * x * sum;
}

struct KPair {
  double k0;
  double k1;
};

// Steed's algorithm for CF2 at order zero (Numerical Recipes, bessik).
KPair k_continued_fraction(double x) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < 100000; ++i) {
    a -= 2 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h = a1 * h;
  const double k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  const double k1 = k0 * (x + 0.5 - h) / x;
  return {k0, k1};
}

// K_nu(x) ~ sqrt(pi/2x) e^{-x} sum_k prod_{j<=k}(4nu^2-(2j-1)^2) / (k! (8x)^k)
double k_asymptotic(int nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < kEps * std::abs(sum)) break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace

double bessel_k(BesselOrder order, double x) {
  if (!(x > 0.0) || std::isnan(x)) {
    throw DomainError("bessel_k: argument must be positive, got " + std::to_string(x));
  }
  if (std::isinf(x)) return 0.0;
  const int nu = static_cast<int>(order);
  if (x <= kBesselSeriesCrossover) {
    return nu == 0 ? k0_series(x) : k1_series(x);
  }
  if (x >= kBesselAsymptoticCrossover) {
    return k_asymptotic(nu, x);
  }
  const KPair k = k_continued_fraction(x);
  return nu == 0 ? k.k0 : k.k1;
}

double bessel_k(int order, double x) {
  if (order != 0 && order != 1) {
    throw DomainError("bessel_k: only orders 0 and 1 are supported");
  }
  return bessel_k(static_cast<BesselOrder>(order), x);
}

}  // namespace volbound
