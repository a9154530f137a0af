#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mntk/kernel.hpp"
#include "mntk/model.hpp"
#include "mntk/numerics.hpp"
#include "mntk/trajectory.hpp"

namespace mntk {

enum class OdeSystem { GF_RESIDUAL, LOWRES, HB_HIGHRES, NAG_HIGHRES };
enum class KernelMode { FROZEN, COUPLED };

/// Residual Delta = f - y and its time derivative at time t.
template <typename Scalar>
struct ResidualState {
  Scalar t{0};
  VectorX<Scalar> delta;
  VectorX<Scalar> delta_dot;
};

struct DynamicsConfig {
  OdeSystem system = OdeSystem::HB_HIGHRES;
  KernelMode kernel_mode = KernelMode::FROZEN;
  double s = 0.0;        // high-resolution step parameter
  double lambda0 = 0.0;  // alpha = lambda0 / 2 in the damping sqrt(2 lambda0)
  double b = 0.0;        // low-resolution damping
  double h = 0.01;       // RK4 step
  double t_end = 10.0;
  long record_every = 1;  // in RK4 steps
  /// Upper spectral bound used to check s <= 2 / lambda_m. When unset, the
  /// bound lambda_max(H(0)) + lambda0 / 4 of the integrated kernel is used.
  std::optional<double> lambda_m;
};

/// Result of a residual-space integration: the recorded states and the
/// matching trajectory records.
template <typename Scalar>
struct DynamicsRun {
  std::vector<ResidualState<Scalar>> states;
  Trajectory records;
};

namespace detail {

inline bool is_high_resolution(OdeSystem s) {
  return s == OdeSystem::HB_HIGHRES || s == OdeSystem::NAG_HIGHRES;
}

inline void validate_dynamics(const DynamicsConfig& cfg, double lambda_m) {
  if (!(cfg.h > 0.0)) throw InvalidInput("dynamics: RK4 step must be positive");
  if (!(cfg.t_end >= 0.0)) throw InvalidInput("dynamics: t_end must be >= 0");
  if (cfg.record_every < 1) throw InvalidInput("dynamics: record_every must be >= 1");
  if (is_high_resolution(cfg.system)) {
    if (!(cfg.lambda0 > 0.0)) throw InvalidInput("dynamics: lambda0 must be positive");
    if (!(cfg.s > 0.0)) throw InvalidInput("dynamics: s must be positive");
    const double s_max = 2.0 / lambda_m;
    if (cfg.s > s_max * (1.0 + 1e-12)) {
      throw InvalidInput("dynamics: s = " + std::to_string(cfg.s) + " exceeds 2/lambda_m = " +
                         std::to_string(s_max));
    }
  }
  if (cfg.system == OdeSystem::LOWRES && !(cfg.b > 0.0)) {
    throw InvalidInput("dynamics: low-resolution damping b must be positive");
  }
}

}  // namespace detail

/// Delta'' for the low-resolution momentum ODE: -b Delta' - H Delta.
template <typename Scalar>
VectorX<Scalar> lowres_residual_rhs(const ResidualState<Scalar>& state,
                                    const GramMatrix<Scalar>& H, Scalar b) {
  return -b * state.delta_dot - H.H * state.delta;
}

/// Delta'' = -sqrt(2 lambda0) Delta' - (1 + sqrt(lambda0 s / 2)) H Delta.
template <typename Scalar>
VectorX<Scalar> hb_residual_rhs(const ResidualState<Scalar>& state, const GramMatrix<Scalar>& H,
                                Scalar s, Scalar lambda0) {
  using std::sqrt;
  const Scalar damping = sqrt(Scalar(2) * lambda0);
  const Scalar stiffness = Scalar(1) + sqrt(lambda0 * s / Scalar(2));
  return -damping * state.delta_dot - stiffness * (H.H * state.delta);
}

/// HB right-hand side plus the gradient-correction term -sqrt(s) H Delta'.
template <typename Scalar>
VectorX<Scalar> nag_residual_rhs(const ResidualState<Scalar>& state, const GramMatrix<Scalar>& H,
                                 Scalar s, Scalar lambda0) {
  using std::sqrt;
  return hb_residual_rhs(state, H, s, lambda0) - sqrt(s) * (H.H * state.delta_dot);
}

/// (1 + sqrt(l0 s/2)) L_hat + |D'|^2/4 + |D' + sqrt(2 l0) D|^2/4, L_hat = D'HD/2.
template <typename Scalar>
Scalar lyapunov_hb(const ResidualState<Scalar>& state, const GramMatrix<Scalar>& H, Scalar s,
                   Scalar lambda0) {
  using std::sqrt;
  const Scalar pseudo = state.delta.dot(H.H * state.delta) / Scalar(2);
  const VectorX<Scalar> mixed = state.delta_dot + sqrt(Scalar(2) * lambda0) * state.delta;
  return (Scalar(1) + sqrt(lambda0 * s / Scalar(2))) * pseudo +
         state.delta_dot.squaredNorm() / Scalar(4) + mixed.squaredNorm() / Scalar(4);
}

/// As lyapunov_hb with sqrt(s) H D added inside the mixed term.
template <typename Scalar>
Scalar lyapunov_nag(const ResidualState<Scalar>& state, const GramMatrix<Scalar>& H, Scalar s,
                    Scalar lambda0) {
  using std::sqrt;
  const VectorX<Scalar> HD = H.H * state.delta;
  const Scalar pseudo = state.delta.dot(HD) / Scalar(2);
  const VectorX<Scalar> mixed =
      state.delta_dot + sqrt(Scalar(2) * lambda0) * state.delta + sqrt(s) * HD;
  return (Scalar(1) + sqrt(lambda0 * s / Scalar(2))) * pseudo +
         state.delta_dot.squaredNorm() / Scalar(4) + mixed.squaredNorm() / Scalar(4);
}

/// Lyapunov value matching the configured system, when one is defined.
template <typename Scalar>
std::optional<double> lyapunov_for(const DynamicsConfig& cfg, const ResidualState<Scalar>& state,
                                   const GramMatrix<Scalar>& H) {
  const Scalar s = static_cast<Scalar>(cfg.s);
  const Scalar l0 = static_cast<Scalar>(cfg.lambda0);
  switch (cfg.system) {
    case OdeSystem::HB_HIGHRES: return static_cast<double>(lyapunov_hb(state, H, s, l0));
    case OdeSystem::NAG_HIGHRES: return static_cast<double>(lyapunov_nag(state, H, s, l0));
    case OdeSystem::GF_RESIDUAL:
    case OdeSystem::LOWRES: break;
  }
  return std::nullopt;
}

namespace detail {

template <typename Scalar>
TrajectoryRecord residual_record(long step, const DynamicsConfig& cfg,
                                 const ResidualState<Scalar>& state, const GramMatrix<Scalar>& H) {
  TrajectoryRecord rec;
  rec.step = step;
  rec.t = static_cast<double>(state.t);
  rec.loss = static_cast<double>(state.delta.squaredNorm() / Scalar(2));
  rec.pseudo_loss = static_cast<double>(state.delta.dot(H.H * state.delta) / Scalar(2));
  rec.residual_norm = static_cast<double>(state.delta.norm());
  rec.lambda_min_H = static_cast<double>(H.lambda_min);
  rec.lyapunov = lyapunov_for(cfg, state, H);
  return rec;
}

}  // namespace detail

/// Residual dynamics with a frozen kernel H. GF_RESIDUAL integrates the
/// first-order flow Delta' = -H Delta (Delta' is reported, not integrated);
/// the other systems integrate (Delta, Delta') from rest.
template <typename Scalar>
DynamicsRun<Scalar> integrate_residual(const GramMatrix<Scalar>& H, const VectorX<Scalar>& delta0,
                                       const DynamicsConfig& cfg) {
  using std::ceil;
  const Eigen::Index n = H.order();
  if (delta0.size() != n) throw InvalidInput("integrate_residual: delta0 length mismatch");
  detail::validate_dynamics(cfg, cfg.lambda_m.value_or(static_cast<double>(H.lambda_max) +
                                                       cfg.lambda0 / 4.0));
  const Scalar s = static_cast<Scalar>(cfg.s);
  const Scalar l0 = static_cast<Scalar>(cfg.lambda0);
  const Scalar b = static_cast<Scalar>(cfg.b);
  const bool first_order = cfg.system == OdeSystem::GF_RESIDUAL;

  auto unpack = [&](Scalar t, const VectorX<Scalar>& y) {
    ResidualState<Scalar> st;
    st.t = t;
    if (first_order) {
      st.delta = y;
      st.delta_dot = -(H.H * y);
    } else {
      st.delta = y.head(n);
      st.delta_dot = y.tail(n);
    }
    return st;
  };

  auto field = [&](Scalar t, const VectorX<Scalar>& y) -> VectorX<Scalar> {
    if (first_order) return -(H.H * y);
    const ResidualState<Scalar> st = unpack(t, y);
    VectorX<Scalar> dy(2 * n);
    dy.head(n) = st.delta_dot;
    switch (cfg.system) {
      case OdeSystem::LOWRES: dy.tail(n) = lowres_residual_rhs(st, H, b); break;
      case OdeSystem::HB_HIGHRES: dy.tail(n) = hb_residual_rhs(st, H, s, l0); break;
      case OdeSystem::NAG_HIGHRES: dy.tail(n) = nag_residual_rhs(st, H, s, l0); break;
      case OdeSystem::GF_RESIDUAL: break;
    }
    return dy;
  };

  OdeState<Scalar> y0;
  y0.t = Scalar(0);
  if (first_order) {
    y0.y = delta0;
  } else {
    y0.y = VectorX<Scalar>::Zero(2 * n);
    y0.y.head(n) = delta0;
  }

  const Scalar t_end = static_cast<Scalar>(cfg.t_end);
  const Scalar h = static_cast<Scalar>(cfg.h);
  const long total = cfg.t_end > 0.0
                         ? std::max(1L, static_cast<long>(ceil(cfg.t_end / cfg.h - 1e-9)))
                         : 0L;

  DynamicsRun<Scalar> run;
  auto record = [&](long step, const OdeState<Scalar>& st) {
    ResidualState<Scalar> rs = unpack(st.t, st.y);
    run.records.push_back(detail::residual_record(step, cfg, rs, H));
    run.states.push_back(std::move(rs));
  };
  record(0, y0);
  try {
    rk4_integrate(field, y0, t_end, h, [&](long step, const OdeState<Scalar>& st) {
      if (step % cfg.record_every == 0 || step == total) record(step, st);
    });
  } catch (DivergenceError& e) {
    throw DivergenceError(e.what(), e.t(), e.last_state(), std::move(run.records));
  }
  return run;
}

/// Gradient flow Delta' = -H Delta with H frozen.
template <typename Scalar>
DynamicsRun<Scalar> gradient_flow_residual(const GramMatrix<Scalar>& H,
                                           const VectorX<Scalar>& delta0, DynamicsConfig cfg) {
  cfg.system = OdeSystem::GF_RESIDUAL;
  return integrate_residual(H, delta0, cfg);
}

/// Integrates the momentum dynamics starting from the network at rest.
/// FROZEN: residual ODE with H = H(0). COUPLED: the weight-space ODE, with
/// H(t) and Delta(t) = f(W(t)) - y recomputed at every observer point; the
/// NAG Hessian term uses the almost-sure Gauss-Newton form J'J.
template <typename Scalar>
DynamicsRun<Scalar> integrate_dynamics(const NetworkState<Scalar>& net0,
                                       const Dataset<Scalar>& data, const DynamicsConfig& cfg) {
  using std::ceil;
  using std::sqrt;
  const GramMatrix<Scalar> H0 = gram_at(net0, data.X);
  const VectorX<Scalar> delta0 = forward(net0, data.X) - data.y;
  if (cfg.kernel_mode == KernelMode::FROZEN) return integrate_residual(H0, delta0, cfg);

  detail::validate_dynamics(cfg, cfg.lambda_m.value_or(static_cast<double>(H0.lambda_max) +
                                                       cfg.lambda0 / 4.0));
  if (cfg.system == OdeSystem::GF_RESIDUAL) {
    throw InvalidInput("integrate_dynamics: COUPLED mode needs a second-order system");
  }
  const Eigen::Index m = net0.width();
  const Eigen::Index d = net0.dim();
  const Eigen::Index md = m * d;
  const Scalar s = static_cast<Scalar>(cfg.s);
  const Scalar l0 = static_cast<Scalar>(cfg.lambda0);
  const Scalar inv_sqrt_m = Scalar(1) / sqrt(static_cast<Scalar>(m));

  Scalar damping = static_cast<Scalar>(cfg.b);
  Scalar stiffness(1);
  if (detail::is_high_resolution(cfg.system)) {
    damping = sqrt(Scalar(2) * l0);
    stiffness = Scalar(1) + sqrt(l0 * s / Scalar(2));
  }
  const bool correction = cfg.system == OdeSystem::NAG_HIGHRES;

  auto weights_of = [&](const VectorX<Scalar>& y) {
    NetworkState<Scalar> net;
    net.W = y.head(md).reshaped(m, d);
    net.a = net0.a;
    net.W_prev = net.W;
    return net;
  };

  auto field = [&](Scalar, const VectorX<Scalar>& y) -> VectorX<Scalar> {
    const NetworkState<Scalar> net = weights_of(y);
    const auto Wdot = y.tail(md).reshaped(m, d);
    const VectorX<Scalar> residual = forward(net, data.X) - data.y;
    MatrixX<Scalar> accel = -damping * Wdot - stiffness * grad_w(net, data.X, residual);
    if (correction) {
      // Hessian-vector product J'J wdot, with J wdot = Delta'.
      const MatrixX<Scalar> active = detail::activation_pattern(detail::preactivations(net, data.X));
      const MatrixX<Scalar> proj = (Wdot * data.X.transpose()).cwiseProduct(active);
      const VectorX<Scalar> delta_dot = inv_sqrt_m * (proj.transpose() * net.a);
      accel -= sqrt(s) * grad_w(net, data.X, delta_dot);
    }
    VectorX<Scalar> dy(2 * md);
    dy.head(md) = y.tail(md);
    dy.tail(md) = accel.reshaped();
    return dy;
  };

  DynamicsRun<Scalar> run;
  auto record = [&](long step, const OdeState<Scalar>& st) {
    const NetworkState<Scalar> net = weights_of(st.y);
    const auto Wdot = st.y.tail(md).reshaped(m, d);
    const MatrixX<Scalar> active = detail::activation_pattern(detail::preactivations(net, data.X));
    ResidualState<Scalar> rs;
    rs.t = st.t;
    rs.delta = forward(net, data.X) - data.y;
    // Delta'_i = (1/sqrt m) sum_r a_r 1{w_r.x_i >= 0} x_i . wdot_r
    const MatrixX<Scalar> proj = (Wdot * data.X.transpose()).cwiseProduct(active);
    rs.delta_dot = inv_sqrt_m * (proj.transpose() * net.a);
    const GramMatrix<Scalar> H = gram_at(net, data.X);
    TrajectoryRecord rec = detail::residual_record(step, cfg, rs, H);
    rec.max_displacement = static_cast<double>(max_displacement(net, net0));
    run.records.push_back(rec);
    run.states.push_back(std::move(rs));
  };

  OdeState<Scalar> y0;
  y0.y = VectorX<Scalar>::Zero(2 * md);
  y0.y.head(md) = net0.W.reshaped();
  const long total = cfg.t_end > 0.0
                         ? std::max(1L, static_cast<long>(ceil(cfg.t_end / cfg.h - 1e-9)))
                         : 0L;
  record(0, y0);
  try {
    rk4_integrate(field, y0, static_cast<Scalar>(cfg.t_end), static_cast<Scalar>(cfg.h),
                  [&](long step, const OdeState<Scalar>& st) {
                    if (step % cfg.record_every == 0 || step == total) record(step, st);
                  });
  } catch (DivergenceError& e) {
    throw DivergenceError(e.what(), e.t(), e.last_state(), std::move(run.records));
  }
  return run;
}

}  // namespace mntk
