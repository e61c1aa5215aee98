#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <cmath>
#include <limits>

#include "generators.hpp"
#include "oracles.hpp"
#include "volbound/errors.hpp"
#include "volbound/special_functions.hpp"

using namespace volbound;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("norm_cdf against Boost normal distribution") {
  const boost::math::normal_distribution<double> nd;
  for (double x = -37.0; x <= 8.0; x += 0.173) {
    const double expect = boost::math::cdf(nd, x);
    CHECK(norm_cdf(x) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(norm_cdf(0.0) == 0.5);
  CHECK(norm_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-15));
}

TEST_CASE("norm_cdf symmetry and monotonicity") {
  gen::Gen g(11);
  for (int i = 0; i < 500; ++i) {
    const double x = g.uniform(-10.0, 10.0);
    CHECK(norm_cdf(x) + norm_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(norm_cdf(x + 1e-3) >= norm_cdf(x));
  }
}

TEST_CASE("norm_cdf rejects non-finite input") {
  CHECK_THROWS_AS(norm_cdf(std::numeric_limits<double>::quiet_NaN()), DomainError);
  CHECK_THROWS_AS(norm_cdf(std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("bessel_k matches the integral representation in every regime") {
  for (double x : {0.01, 0.1, 0.5, 1.0, 1.999, 2.0, 2.001, 3.7, 8.0, 14.0, 24.99, 25.0, 25.01,
                   40.0, 120.0}) {
    for (int nu : {0, 1}) {
      const double expect = oracle::bessel_k(nu, x);
      CAPTURE(x);
      CAPTURE(nu);
      CHECK(rel_err(bessel_k(nu, x), expect) < 1e-12);
    }
  }
}

TEST_CASE("bessel_k agrees with Boost cyl_bessel_k on random points") {
  gen::Gen g(5);
  for (int i = 0; i < 400; ++i) {
    const double x = g.log_uniform(1e-4, 200.0);
    CAPTURE(x);
    CHECK(rel_err(bessel_k(BesselOrder::k0, x), boost::math::cyl_bessel_k(0, x)) < 1e-13);
    CHECK(rel_err(bessel_k(BesselOrder::k1, x), boost::math::cyl_bessel_k(1, x)) < 1e-13);
  }
}

TEST_CASE("bessel_k is continuous across the regime crossovers") {
  for (double c : {kBesselSeriesCrossover, kBesselAsymptoticCrossover}) {
    for (int nu : {0, 1}) {
      const double lo = bessel_k(nu, std::nextafter(c, 0.0));
      const double hi = bessel_k(nu, std::nextafter(c, 100.0));
      CHECK(rel_err(lo, hi) < 1e-13);
    }
  }
}

TEST_CASE("bessel_k ordering and derivative identity") {
  gen::Gen g(17);
  for (int i = 0; i < 300; ++i) {
    const double x = g.log_uniform(1e-3, 60.0);
    const double k0 = bessel_k(0, x);
    const double k1 = bessel_k(1, x);
    CHECK(k0 > 0.0);
    CHECK(k1 > k0);
    // K0' = -K1, by central difference.
    const double h = 1e-5 * x;
    const double d = (bessel_k(0, x + h) - bessel_k(0, x - h)) / (2.0 * h);
    CHECK(d == doctest::Approx(-k1).epsilon(1e-7));
  }
}

TEST_CASE("bessel_k domain errors") {
  CHECK_THROWS_AS(bessel_k(0, 0.0), DomainError);
  CHECK_THROWS_AS(bessel_k(1, -1.0), DomainError);
  CHECK_THROWS_AS(bessel_k(0, std::numeric_limits<double>::quiet_NaN()), DomainError);
  CHECK_THROWS_AS(bessel_k(2, 1.0), DomainError);
}

TEST_CASE("AccuracySpec validation") {
  CHECK_NOTHROW(AccuracySpec(1e-10, 1e-14));
  CHECK_THROWS_AS(AccuracySpec(0.0, 1e-14), DomainError);
  CHECK_THROWS_AS(AccuracySpec(1e-10, -1.0), DomainError);
}
