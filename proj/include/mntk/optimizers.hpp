#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

#include "mntk/kernel.hpp"
#include "mntk/model.hpp"
#include "mntk/theory.hpp"
#include "mntk/trajectory.hpp"

namespace mntk {

inline constexpr double kLossCeiling = 1e12;

struct OptimizerConfig {
  Method method = Method::GD;
  double eta = 0.1;
  double beta = 0.0;
  long max_iters = 1000;
  long record_every = 10;
};

inline void validate(const OptimizerConfig& cfg) {
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw InvalidInput("eta must be positive");
  if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) throw InvalidInput("beta must lie in [0, 1)");
  if (cfg.max_iters < 0) throw InvalidInput("max_iters must be >= 0");
  if (cfg.record_every < 1) throw InvalidInput("record_every must be >= 1");
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::GD: return "GD";
    case Method::HB: return "HB";
    case Method::NAG: return "NAG";
  }
  return "?";
}

namespace detail {

/// W + beta (W - W_prev) - eta g [- beta eta (g - g_prev)], sharing one code
/// path so that beta = 0 and a vanishing correction reduce bitwise to GD/HB.
template <typename Scalar>
NetworkState<Scalar> momentum_update(const NetworkState<Scalar>& net, const MatrixX<Scalar>& g,
                                     const std::type_identity_t<MatrixX<Scalar>>* g_prev,
                                     std::type_identity_t<Scalar> eta,
                                     std::type_identity_t<Scalar> beta) {
  NetworkState<Scalar> next;
  next.a = net.a;
  next.W = net.W - eta * g;
  if (beta != Scalar(0)) {
    next.W += beta * (net.W - net.W_prev);
    if (g_prev) next.W -= (beta * eta) * (g - *g_prev);
  }
  next.W_prev = net.W;
  return next;
}

}  // namespace detail

template <typename Scalar>
NetworkState<Scalar> gd_step(const NetworkState<Scalar>& net, const Dataset<Scalar>& data,
                             Scalar eta) {
  return detail::momentum_update(net, grad_w(net, data), nullptr, eta, Scalar(0));
}

template <typename Scalar>
NetworkState<Scalar> hb_step(const NetworkState<Scalar>& net, const Dataset<Scalar>& data,
                             Scalar eta, Scalar beta) {
  return detail::momentum_update(net, grad_w(net, data), nullptr, eta, beta);
}

/// One NAG step with gradient correction. `prev_grad` is the gradient at
/// W_prev (zero correction at step 0 when W_prev == W). Returns the new state
/// and the gradient at the current W for reuse in the next step.
template <typename Scalar>
std::pair<NetworkState<Scalar>, MatrixX<Scalar>> nag_step(const NetworkState<Scalar>& net,
                                                          const MatrixX<Scalar>& prev_grad,
                                                          const Dataset<Scalar>& data, Scalar eta,
                                                          Scalar beta) {
  MatrixX<Scalar> g = grad_w(net, data);
  if (prev_grad.rows() != g.rows() || prev_grad.cols() != g.cols()) {
    throw InvalidInput("nag_step: prev_grad shape mismatch");
  }
  auto next = detail::momentum_update(net, g, &prev_grad, eta, beta);
  return {std::move(next), std::move(g)};
}

/// Fills every column of a discrete-run record that depends only on the
/// current network (loss, pseudo-loss, residual norm, displacement, lambda_min(H)).
template <typename Scalar>
TrajectoryRecord make_record(long step, const NetworkState<Scalar>& net,
                             const NetworkState<Scalar>& net0, const Dataset<Scalar>& data,
                             const VectorX<Scalar>& residual, double eta) {
  const GramMatrix<Scalar> H = gram_at(net, data.X);
  TrajectoryRecord rec;
  rec.step = step;
  rec.t = static_cast<double>(step) * std::sqrt(eta);
  rec.loss = static_cast<double>(pairwise_sum(VectorX<Scalar>(residual.array().square())) / 2);
  rec.pseudo_loss = static_cast<double>(residual.dot(H.H * residual) / Scalar(2));
  rec.residual_norm = static_cast<double>(residual.norm());
  rec.max_displacement = static_cast<double>(max_displacement(net, net0));
  rec.lambda_min_H = static_cast<double>(H.lambda_min);
  return rec;
}

/// Runs cfg.max_iters steps from net0 (with w(-1) = w(0)), recording step 0,
/// every record_every-th step and the final step. Throws DivergenceError with
/// the partial trajectory if the loss exceeds 1e12 or becomes non-finite.
template <typename Scalar>
Trajectory train(const NetworkState<Scalar>& net0, const Dataset<Scalar>& data,
                 const OptimizerConfig& cfg) {
  validate(cfg);
  const Scalar eta = static_cast<Scalar>(cfg.eta);
  const Scalar beta = static_cast<Scalar>(cfg.beta);
  NetworkState<Scalar> start = net0;
  start.W_prev = start.W;

  Trajectory records;
  NetworkState<Scalar> net = start;
  MatrixX<Scalar> prev_grad;  // gradient at W_prev, needed by NAG

  for (long step = 0;; ++step) {
    const VectorX<Scalar> residual = forward(net, data.X) - data.y;
    const double current_loss =
        static_cast<double>(pairwise_sum(VectorX<Scalar>(residual.array().square())) / 2);
    if (!std::isfinite(current_loss) || current_loss > kLossCeiling) {
      throw DivergenceError(std::string(to_string(cfg.method)) + " diverged at step " +
                                std::to_string(step),
                            static_cast<double>(step),
                            net.W.template cast<double>().reshaped(), std::move(records));
    }
    const bool last = step == cfg.max_iters;
    if (step % cfg.record_every == 0 || last) {
      records.push_back(make_record(step, net, start, data, residual, cfg.eta));
    }
    if (last) break;

    MatrixX<Scalar> g = grad_w(net, data.X, residual);
    switch (cfg.method) {
      case Method::GD:
        net = detail::momentum_update(net, g, nullptr, eta, Scalar(0));
        break;
      case Method::HB:
        net = detail::momentum_update(net, g, nullptr, eta, beta);
        break;
      case Method::NAG:
        if (step == 0) prev_grad = g;
        net = detail::momentum_update(net, g, &prev_grad, eta, beta);
        prev_grad = std::move(g);
        break;
    }
  }
  return records;
}

/// First recorded step whose loss is <= fraction * loss(step 0), or -1.
inline long steps_to_threshold(const Trajectory& records, double fraction) {
  if (records.empty()) return -1;
  const double target = fraction * records.front().loss;
  for (const auto& r : records)
    if (r.loss <= target) return r.step;
  return -1;
}

}  // namespace mntk
