#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "volbound/quadrature.hpp"

using namespace volbound;

TEST_CASE("gauss_kronrod on smooth integrands") {
  const auto r1 = quad::gauss_kronrod([](double x) { return std::exp(-x * x); }, -6.0, 6.0);
  CHECK(r1.value == doctest::Approx(std::sqrt(std::numbers::pi) * std::erf(6.0)).epsilon(1e-14));
  const auto r2 = quad::gauss_kronrod([](double x) { return std::cos(x); }, 0.0, 1.0);
  CHECK(r2.value == doctest::Approx(std::sin(1.0)).epsilon(1e-14));
  CHECK(r2.evaluations > 0);
}

TEST_CASE("gauss_kronrod copes with an integrable endpoint singularity") {
  const auto f = [](double x) { return std::log(x); };
  const auto r = quad::gauss_kronrod(f, 0.0, 1.0, 1e-10, 1e-14);
  CHECK(r.value == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("gauss_kronrod agrees with the Boost oracle on a kinked integrand") {
  const auto f = [](double x) { return std::abs(x - 0.3) * std::exp(x); };
  const double expect = oracle::integrate(f, 0.0, 0.3) + oracle::integrate(f, 0.3, 2.0);
  CHECK(quad::gauss_kronrod(f, 0.0, 2.0, 1e-12).value == doctest::Approx(expect).epsilon(1e-11));
}

TEST_CASE("adaptive_simpson reaches its tolerance") {
  const auto f = [](double x) { return 1.0 / (1.0 + x * x); };
  const auto r = quad::adaptive_simpson(f, 0.0, 1.0, 1e-12);
  CHECK(r.value == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-11));
}

TEST_CASE("adaptive_simpson is exact on cubics") {
  const auto f = [](double x) { return 3.0 * x * x * x - x + 2.0; };
  const auto r = quad::adaptive_simpson(f, -1.0, 2.0);
  CHECK(r.value == doctest::Approx(3.0 * 15.0 / 4.0 - 1.5 + 6.0).epsilon(1e-14));
}

TEST_CASE("empty interval integrates to zero") {
  const auto f = [](double x) { return x; };
  CHECK(quad::gauss_kronrod(f, 1.0, 1.0).value == 0.0);
  CHECK(quad::adaptive_simpson(f, 1.0, 1.0).value == 0.0);
}
