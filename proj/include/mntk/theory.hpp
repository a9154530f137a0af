#pragma once

namespace mntk {

enum class Method { GD, HB, NAG };

/// Which square root appears in the closed-form NAG rate. sqrt(8 + 16a + 9a^2)
/// reproduces both interval endpoints; sqrt(8 + 16a + a^2) is kept for comparison.
enum class Discriminant { NineAlphaSquared, AlphaSquared };

enum class RateProblem { HB, NAG, NAG_NO_CORRECTION };

/// Everything needed to draw a loss-bound curve for one run.
struct RateBundle {
  double lambda0 = 0.0;
  double s = 0.0;
  double alpha = 0.0;        // sqrt(2 lambda0 s) / 4
  double rho_hb = 0.0;       // dimensionless; the time constant is rho * sqrt(lambda0 / 2)
  double rho_nag = 0.0;
  double prefactor_hb = 0.0;   // 6 L_hat(0) / lambda0
  double prefactor_nag = 0.0;  // 26 L_hat(0) / (3 lambda0)
  double L_hat0 = 0.0;
  bool s_clamped = false;    // s was reduced to s_max
};

/// 2 - sqrt(2).
double rho_hb();

/// (4 + 3a - sqrt(8 + 16a + 9a^2)) / 2 for a in [0, 0.5].
double rho_nag(double alpha, Discriminant form = Discriminant::NineAlphaSquared);

/// Numerically solves the max-min rate problem. HB maximizes
/// min{2z, 4/(2 + 1/phi), (1 - z)/(1 + phi)} over phi in (0, 10], z in [0, 1];
/// NAG maximizes min{2/(3 + 2phi), 4(1 + a)/(2 + 1/phi), 4/(1 + phi)} over phi;
/// NAG_NO_CORRECTION is the NAG objective with the (1 + a) factor removed.
double maxmin_rate_solver(RateProblem problem, double alpha = 0.0);

/// alpha = sqrt(2 lambda0 s) / 4.
double rate_alpha(double lambda0, double s);

/// Builds the bundle. If s_max > 0 and s exceeds it, s is clamped to s_max
/// and `s_clamped` is set.
RateBundle make_rate_bundle(double lambda0, double s, double L_hat0, double s_max = 0.0);

/// Right-hand side of the loss bound for `method` (HB or NAG) at time t.
double bound_curve(Method method, const RateBundle& bundle, double t);

/// n^6 / (delta^3 lambda0^4) with unit implied constant. Advisory only.
double width_requirement(long n, double lambda0, double delta);

/// Weight-displacement radius: HB 10 sqrt(6 L n / (l0^3 m)), NAG 25 sqrt(L n / (l0^3 m)).
double radius_bounds(Method method, double L_hat0, long n, double lambda0, long m);

/// Kernel-stability radius c delta lambda0 / n^2 with c = 1. Advisory only.
double kernel_stability_radius(double delta, double lambda0, long n);

}  // namespace mntk
