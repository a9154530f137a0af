#include "mntk/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "mntk/errors.hpp"

namespace mntk {
namespace {

constexpr double kPhiMax = 10.0;
constexpr double kGridStep = 1e-4;
constexpr double kRefineTolerance = 1e-8;

/// Golden-section maximization of a unimodal function on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol,
                  double* argmax = nullptr) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  if (argmax) *argmax = x;
  return std::max({f(x), fc, fd});
}

/// Inner maximization over z for fixed phi; the objective is a minimum of
/// affine functions of z, hence concave.
double hb_objective(double phi) {
  const double second = 4.0 / (2.0 + 1.0 / phi);
  auto in_z = [&](double z) { return std::min({2.0 * z, second, (1.0 - z) / (1.0 + phi)}); };
  return golden_max(in_z, 0.0, 1.0, 1e-13);
}

double nag_objective(double phi, double correction) {
  return std::min({2.0 / (3.0 + 2.0 * phi), 4.0 * correction / (2.0 + 1.0 / phi),
                   4.0 / (1.0 + phi)});
}

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    throw InvalidInput("alpha must lie in [0, 0.5], got " + std::to_string(alpha));
  }
}

}  // namespace

double rho_hb() { return 2.0 - std::sqrt(2.0); }

double rho_nag(double alpha, Discriminant form) {
  require_alpha(alpha);
  const double quadratic = form == Discriminant::NineAlphaSquared ? 9.0 : 1.0;
  return 0.5 * (4.0 + 3.0 * alpha - std::sqrt(8.0 + 16.0 * alpha + quadratic * alpha * alpha));
}

double maxmin_rate_solver(RateProblem problem, double alpha) {
  std::function<double(double)> objective;
  switch (problem) {
    case RateProblem::HB:
      objective = hb_objective;
      break;
    case RateProblem::NAG:
      require_alpha(alpha);
      objective = [alpha](double phi) { return nag_objective(phi, 1.0 + alpha); };
      break;
    case RateProblem::NAG_NO_CORRECTION:
      objective = [](double phi) { return nag_objective(phi, 1.0); };
      break;
  }

  // Coarse grid over (0, 10], then golden-section refinement around the best node.
  double best_phi = kGridStep;
  double best = objective(best_phi);
  const long nodes = static_cast<long>(std::lround(kPhiMax / kGridStep));
  for (long k = 2; k <= nodes; ++k) {
    const double phi = static_cast<double>(k) * kGridStep;
    const double value = objective(phi);
    if (value > best) {
      best = value;
      best_phi = phi;
    }
  }
  const double lo = std::max(best_phi - kGridStep, 0.5 * kGridStep);
  const double hi = std::min(best_phi + kGridStep, kPhiMax);
  return std::max(best, golden_max(objective, lo, hi, kRefineTolerance));
}

double rate_alpha(double lambda0, double s) { return std::sqrt(2.0 * lambda0 * s) / 4.0; }

RateBundle make_rate_bundle(double lambda0, double s, double L_hat0, double s_max) {
  if (!(lambda0 > 0.0)) throw InvalidInput("rate bundle: lambda0 must be positive");
  if (!(s > 0.0)) throw InvalidInput("rate bundle: s must be positive");
  RateBundle b;
  b.lambda0 = lambda0;
  b.s = s;
  if (s_max > 0.0 && s > s_max) {
    b.s = s_max;
    b.s_clamped = true;
  }
  b.alpha = std::min(rate_alpha(lambda0, b.s), 0.5);
  b.rho_hb = rho_hb();
  b.rho_nag = rho_nag(b.alpha);
  b.L_hat0 = L_hat0;
  b.prefactor_hb = 6.0 * L_hat0 / lambda0;
  b.prefactor_nag = 26.0 * L_hat0 / (3.0 * lambda0);
  return b;
}

double bound_curve(Method method, const RateBundle& bundle, double t) {
  if (!(t >= 0.0)) throw InvalidInput("bound_curve: t must be >= 0");
  const double scale = std::sqrt(bundle.lambda0 / 2.0);
  switch (method) {
    case Method::HB:
      return bundle.prefactor_hb * std::exp(-bundle.rho_hb * scale * t);
    case Method::NAG:
      return bundle.prefactor_nag * std::exp(-bundle.rho_nag * scale * t);
    case Method::GD:
      break;
  }
  throw InvalidInput("bound_curve: only HB and NAG have a bound");
}

double width_requirement(long n, double lambda0, double delta) {
  if (n < 1 || !(lambda0 > 0.0) || !(delta > 0.0 && delta <= 1.0)) {
    throw InvalidInput("width_requirement: need n >= 1, lambda0 > 0, delta in (0, 1]");
  }
  const double nd = static_cast<double>(n);
  return std::pow(nd, 6) / (std::pow(delta, 3) * std::pow(lambda0, 4));
}

double radius_bounds(Method method, double L_hat0, long n, double lambda0, long m) {
  if (!(L_hat0 > 0.0) || n < 1 || !(lambda0 > 0.0) || m < 1) {
    throw InvalidInput("radius_bounds: all arguments must be positive");
  }
  const double core = L_hat0 * static_cast<double>(n) /
                      (lambda0 * lambda0 * lambda0 * static_cast<double>(m));
  switch (method) {
    case Method::HB:
      return 10.0 * std::sqrt(6.0 * core);
    case Method::NAG:
      return 25.0 * std::sqrt(core);
    case Method::GD:
      break;
  }
  throw InvalidInput("radius_bounds: only HB and NAG have a radius");
}

double kernel_stability_radius(double delta, double lambda0, long n) {
  const double nd = static_cast<double>(n);
  return delta * lambda0 / (nd * nd);
}

}  // namespace mntk
