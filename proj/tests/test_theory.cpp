#include <cmath>

#include "doctest.h"
#include "mntk/theory.hpp"
#include "mntk/errors.hpp"

using namespace mntk;

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

TEST_CASE("rho_hb closed form") {
  CHECK(rho_hb() == doctest::Approx(0.5857864376269049).epsilon(1e-15));
  CHECK(std::abs(rho_hb() - rho_nag(0.0)) < 1e-15);
  CHECK(std::abs(maxmin_rate_solver(RateProblem::HB) - rho_hb()) < 1e-6);
}

TEST_CASE("rho_nag endpoints and domain") {
  CHECK(std::abs(rho_nag(0.0) - (2.0 - kSqrt2)) < 1e-15);
  CHECK(std::abs(rho_nag(0.5) - (11.0 - std::sqrt(73.0)) / 4.0) < 1e-12);
  CHECK(rho_nag(0.5) == doctest::Approx(0.6139990637).epsilon(1e-9));
  const double mid = rho_nag(0.25);
  CHECK(mid > rho_nag(0.0));
  CHECK(mid < rho_nag(0.5));
  CHECK(std::abs(mid - maxmin_rate_solver(RateProblem::NAG, 0.25)) < 1e-6);
  CHECK_THROWS_AS(rho_nag(-0.01), InvalidInput);
  CHECK_THROWS_AS(rho_nag(0.51), InvalidInput);
}

TEST_CASE("main-text discriminant does not reproduce the upper endpoint") {
  const double alt = rho_nag(0.5, Discriminant::AlphaSquared);
  CHECK(std::abs(alt - (11.0 - std::sqrt(73.0)) / 4.0) > 1e-2);
  CHECK(rho_nag(0.0, Discriminant::AlphaSquared) == rho_nag(0.0));
}

TEST_CASE("max-min solver: HB, ablated NAG and NAG at 0.5") {
  CHECK(std::abs(maxmin_rate_solver(RateProblem::HB) - (2.0 - kSqrt2)) < 1e-6);
  CHECK(std::abs(maxmin_rate_solver(RateProblem::NAG_NO_CORRECTION) - (2.0 - kSqrt2)) < 1e-6);
  CHECK(std::abs(maxmin_rate_solver(RateProblem::NAG, 0.5) - (11.0 - std::sqrt(73.0)) / 4.0) <
        1e-6);
}

TEST_CASE("rho_nag: monotone, above HB, and matches the solver on a grid") {
  double previous = rho_nag(0.0);
  for (int k = 1; k < 100; ++k) {
    const double alpha = 0.5 * k / 99.0;
    const double value = rho_nag(alpha);
    CHECK(value > previous);
    CHECK(value > rho_hb());
    previous = value;
    if (k % 11 == 0) CHECK(std::abs(value - maxmin_rate_solver(RateProblem::NAG, alpha)) < 1e-6);
  }
}

TEST_CASE("bound_curve") {
  const RateBundle b = make_rate_bundle(0.5, 0.1, 1.0);
  CHECK(bound_curve(Method::HB, b, 0.0) == doctest::Approx(6.0 / 0.5));
  CHECK(bound_curve(Method::NAG, b, 0.0) == doctest::Approx(26.0 / (3.0 * 0.5)));
  // exponent (2 - sqrt2) * sqrt(0.25) * 2 = 2 - sqrt2
  CHECK(bound_curve(Method::HB, b, 2.0) == doctest::Approx(12.0 * std::exp(-(2.0 - kSqrt2))));
  double prev = bound_curve(Method::NAG, b, 0.0);
  for (double t = 0.5; t < 50.0; t += 0.5) {
    const double v = bound_curve(Method::NAG, b, t);
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS_AS(bound_curve(Method::HB, b, -1.0), InvalidInput);
  CHECK_THROWS_AS(bound_curve(Method::GD, b, 1.0), InvalidInput);
}

TEST_CASE("rate bundle: alpha and clamping of s") {
  const RateBundle b = make_rate_bundle(0.2, 0.5, 2.0);
  CHECK(b.alpha == doctest::Approx(std::sqrt(2.0 * 0.2 * 0.5) / 4.0));
  CHECK_FALSE(b.s_clamped);
  const RateBundle c = make_rate_bundle(0.2, 5.0, 2.0, 1.5);
  CHECK(c.s_clamped);
  CHECK(c.s == 1.5);
  CHECK(c.alpha <= 0.5);
  CHECK(c.rho_nag > c.rho_hb);
}

TEST_CASE("width_requirement") {
  CHECK(width_requirement(1, 1.0, 1.0) == 1.0);
  CHECK(width_requirement(2, 0.7, 0.3) / width_requirement(1, 0.7, 0.3) ==
        doctest::Approx(64.0));
  CHECK(width_requirement(20, 0.3, 0.1) == doctest::Approx(7.901234567901234e12).epsilon(1e-12));
  CHECK_THROWS_AS(width_requirement(0, 0.3, 0.1), InvalidInput);
}

TEST_CASE("radius_bounds") {
  CHECK(radius_bounds(Method::HB, 1.0, 6, 1.0, 3600) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(radius_bounds(Method::NAG, 1.0, 1, 1.0, 625) == doctest::Approx(1.0).epsilon(1e-15));
  for (Method m : {Method::HB, Method::NAG}) {
    CHECK(radius_bounds(m, 0.7, 5, 0.2, 400) / radius_bounds(m, 0.7, 5, 0.2, 1600) ==
          doctest::Approx(2.0));
  }
  CHECK_THROWS_AS(radius_bounds(Method::HB, 0.0, 1, 1.0, 1), InvalidInput);
  CHECK(kernel_stability_radius(0.1, 0.5, 10) == doctest::Approx(0.0005));
}
