#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "mntk/model.hpp"
#include "mntk/numerics.hpp"

namespace mntk {

inline constexpr double kPsdTolerance = 1e-10;

/// Symmetric n x n kernel matrix together with its extreme eigenvalues.
template <typename Scalar>
struct GramMatrix {
  MatrixX<Scalar> H;
  Scalar lambda_min{0};
  Scalar lambda_max{0};

  Eigen::Index order() const noexcept { return H.rows(); }
  bool is_psd() const noexcept { return lambda_min >= Scalar(-kPsdTolerance); }
};

template <typename Scalar>
GramMatrix<Scalar> make_gram(MatrixX<Scalar> H) {
  const auto e = eig_extremes(H);
  return {std::move(H), e.lambda_min, e.lambda_max};
}

/// Reference-kernel summary used to pick step sizes and rates.
struct SpectrumReport {
  double lambda0;   // lambda_min of the reference kernel
  double lambda_m;  // lambda_max + lambda0 / 4
  double s_max;     // 2 / lambda_m
  double kappa() const noexcept { return lambda_m / (lambda0 / 2.0); }
};

namespace detail {

/// Copies the upper triangle onto the lower one so the result is exactly symmetric.
template <typename Scalar>
void symmetrize_from_upper(MatrixX<Scalar>& M) {
  for (Eigen::Index j = 0; j < M.cols(); ++j)
    for (Eigen::Index i = j + 1; i < M.rows(); ++i) M(i, j) = M(j, i);
}

}  // namespace detail

/// Finite-width Gram matrix H_ij = (x_i . x_j)/m * sum_r 1{w_r.x_i >= 0} 1{w_r.x_j >= 0}.
template <typename Scalar>
GramMatrix<Scalar> gram_at(const NetworkState<Scalar>& net, const MatrixX<Scalar>& X) {
  detail::require_matching_dim(net, X);
  const MatrixX<Scalar> active = detail::activation_pattern(detail::preactivations(net, X));
  const MatrixX<Scalar> co_active = active.transpose() * active;
  const MatrixX<Scalar> inner = X * X.transpose();
  MatrixX<Scalar> H =
      (inner.array() * co_active.array() / static_cast<Scalar>(net.width())).matrix();
  detail::symmetrize_from_upper(H);
  return make_gram(std::move(H));
}

/// Closed-form infinite-width kernel (first-order arc-cosine kernel):
/// H_ij = u (pi - arccos u) / (2 pi), u = x_i . x_j. Rows must be unit norm.
template <typename Scalar>
GramMatrix<Scalar> ntk_limit_closed(const MatrixX<Scalar>& X) {
  using std::abs;
  using std::acos;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Eigen::Index n = X.rows();
  if (n < 1) throw InvalidInput("ntk_limit_closed: empty input");
  if (!X.allFinite()) throw InvalidInput("ntk_limit_closed: non-finite input");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (abs(X.row(i).norm() - Scalar(1)) > Scalar(kUnitNormTolerance)) {
      throw InvalidInput("ntk_limit_closed: row " + std::to_string(i) + " is not unit norm");
    }
  }
  MatrixX<Scalar> H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // A row with itself subtends angle zero.
    H(i, i) = X.row(i).squaredNorm() / Scalar(2);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar u = X.row(i).dot(X.row(j));
      const Scalar clamped = std::clamp(u, Scalar(-1), Scalar(1));
      H(i, j) = u * (pi - acos(clamped)) / (Scalar(2) * pi);
    }
  }
  detail::symmetrize_from_upper(H);
  return make_gram(std::move(H));
}

/// Monte Carlo estimate of the infinite-width kernel together with the
/// per-entry standard error |x_i.x_j| sqrt(p(1-p)/N).
template <typename Scalar>
struct MonteCarloKernel {
  GramMatrix<Scalar> kernel;
  MatrixX<Scalar> std_error;
};

inline constexpr std::int64_t kMonteCarloShardSize = 1 << 16;

/// E_{w~N(0,I)}[(x_i.x_j) 1{w.x_i >= 0, w.x_j >= 0}] from `samples` shared
/// Gaussian draws. Draws are split into fixed-size shards, each fed by its own
/// counter-offset substream of `rng`, and co-activation counts are integers,
/// so the estimate does not depend on `workers`.
template <typename Scalar>
MonteCarloKernel<Scalar> ntk_limit_mc_with_error(const MatrixX<Scalar>& X, std::int64_t samples,
                                                 Rng& rng, unsigned workers = 1) {
  using std::abs;
  using std::sqrt;
  if (samples < 1) throw InvalidInput("ntk_limit_mc: samples must be >= 1");
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  const MatrixX<double> Xd = X.template cast<double>();
  const std::int64_t shards = (samples + kMonteCarloShardSize - 1) / kMonteCarloShardSize;
  using Counts = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  auto run_shard = [&](std::int64_t shard) {
    Counts counts = Counts::Zero(n, n);
    Rng stream = rng.substream(static_cast<std::uint64_t>(shard));
    const std::int64_t begin = shard * kMonteCarloShardSize;
    const std::int64_t end = std::min(samples, begin + kMonteCarloShardSize);
    Eigen::VectorXd w(d);
    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = begin; k < end; ++k) {
      for (Eigen::Index c = 0; c < d; ++c) w(c) = stream.normal();
      const Eigen::VectorXd proj = Xd * w;
      active.clear();
      for (Eigen::Index i = 0; i < n; ++i)
        if (proj(i) >= 0.0) active.push_back(i);
      for (std::size_t a = 0; a < active.size(); ++a)
        for (std::size_t b = a; b < active.size(); ++b) ++counts(active[a], active[b]);
    }
    return counts;
  };

  std::vector<Counts> partial(static_cast<std::size_t>(shards));
  workers = std::max(1u, workers);
  if (workers == 1) {
    for (std::int64_t s = 0; s < shards; ++s) partial[static_cast<std::size_t>(s)] = run_shard(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::int64_t s = w; s < shards; s += workers)
          partial[static_cast<std::size_t>(s)] = run_shard(s);
      });
    }
  }
  rng.skip_substreams(static_cast<std::uint64_t>(shards) + 1);

  Counts total = Counts::Zero(n, n);
  for (const auto& c : partial) total += c;

  const Scalar N = static_cast<Scalar>(samples);
  MatrixX<Scalar> H(n, n);
  MatrixX<Scalar> se(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const Scalar p = static_cast<Scalar>(total(i, j)) / N;
      const Scalar u = X.row(i).dot(X.row(j));
      H(i, j) = u * p;
      se(i, j) = abs(u) * sqrt(p * (Scalar(1) - p) / N);
    }
  }
  detail::symmetrize_from_upper(H);
  detail::symmetrize_from_upper(se);
  return {make_gram(std::move(H)), std::move(se)};
}

template <typename Scalar>
GramMatrix<Scalar> ntk_limit_mc(const MatrixX<Scalar>& X, std::int64_t samples, Rng& rng,
                                unsigned workers = 1) {
  return ntk_limit_mc_with_error(X, samples, rng, workers).kernel;
}

/// lambda0 = lambda_min, lambda_m = lambda_max + lambda0/4, s_max = 2/lambda_m.
template <typename Scalar>
SpectrumReport spectrum_report(const GramMatrix<Scalar>& reference) {
  const double lambda0 = static_cast<double>(reference.lambda_min);
  if (!(lambda0 > 0.0)) {
    throw DegenerateData("reference kernel is singular (lambda_min = " + std::to_string(lambda0) +
                         "); inputs contain parallel rows");
  }
  const double lambda_m = static_cast<double>(reference.lambda_max) + lambda0 / 4.0;
  return {lambda0, lambda_m, 2.0 / lambda_m};
}

/// max_r ||w_r - w_r(0)||_2
template <typename Scalar>
Scalar max_displacement(const NetworkState<Scalar>& net, const NetworkState<Scalar>& net0) {
  if (net.W.rows() != net0.W.rows() || net.W.cols() != net0.W.cols()) {
    throw InvalidInput("max_displacement: shape mismatch");
  }
  if (net.W.rows() == 0) return Scalar(0);
  return (net.W - net0.W).rowwise().norm().maxCoeff();
}

}  // namespace mntk
