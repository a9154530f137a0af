#pragma once

#include <cmath>

#include <Eigen/Core>

#include "mntk/numerics.hpp"

namespace mntk {

/// Two-layer ReLU network with a fixed +-1 output layer.
/// Row r of W is the hidden weight vector w_r; W_prev is the previous
/// iterate used by the momentum methods (equal to W at initialization).
template <typename Scalar>
struct NetworkState {
  MatrixX<Scalar> W;
  VectorX<Scalar> a;
  MatrixX<Scalar> W_prev;

  Eigen::Index width() const noexcept { return W.rows(); }
  Eigen::Index dim() const noexcept { return W.cols(); }

  friend bool operator==(const NetworkState& lhs, const NetworkState& rhs) {
    return lhs.W.rows() == rhs.W.rows() && lhs.W.cols() == rhs.W.cols() && lhs.W == rhs.W &&
           lhs.a == rhs.a && lhs.W_prev == rhs.W_prev;
  }
};

/// Training inputs (one unit-norm row per sample) and +-1 labels.
template <typename Scalar>
struct Dataset {
  MatrixX<Scalar> X;
  VectorX<Scalar> y;

  Eigen::Index size() const noexcept { return X.rows(); }
  Eigen::Index dim() const noexcept { return X.cols(); }
};

inline constexpr double kUnitNormTolerance = 1e-12;
inline constexpr double kParallelThreshold = 1.0 - 1e-6;

/// Checks unit-norm rows, pairwise non-parallel rows and +-1 labels.
template <typename Scalar>
void validate_dataset(const Dataset<Scalar>& data) {
  using std::abs;
  const Eigen::Index n = data.size();
  if (data.y.size() != n) throw InvalidInput("dataset: label count does not match row count");
  if (!data.X.allFinite()) throw InvalidInput("dataset: non-finite input");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (abs(data.X.row(i).norm() - Scalar(1)) > Scalar(kUnitNormTolerance)) {
      throw InvalidInput("dataset: row " + std::to_string(i) + " is not unit norm");
    }
    if (data.y(i) != Scalar(1) && data.y(i) != Scalar(-1)) {
      throw InvalidInput("dataset: label " + std::to_string(i) + " is not +-1");
    }
  }
  const MatrixX<Scalar> gram = data.X * data.X.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      if (abs(gram(i, j)) >= Scalar(kParallelThreshold)) {
        throw DegenerateData("dataset: rows " + std::to_string(j) + " and " + std::to_string(i) +
                             " are parallel");
      }
    }
  }
}

template <typename Scalar = double>
NetworkState<Scalar> init_network(Eigen::Index m, Eigen::Index d, Rng& rng) {
  if (m < 1 || d < 1) throw InvalidInput("init_network: width and dimension must be >= 1");
  NetworkState<Scalar> net;
  net.W = sample_normal(rng, m * d).reshaped<Eigen::RowMajor>(m, d).template cast<Scalar>();
  net.a = sample_rademacher(rng, m).template cast<Scalar>();
  net.W_prev = net.W;
  return net;
}

namespace detail {

template <typename Scalar>
void require_matching_dim(const NetworkState<Scalar>& net, const MatrixX<Scalar>& X) {
  if (X.cols() != net.dim()) {
    throw InvalidInput("input dimension " + std::to_string(X.cols()) +
                       " does not match network dimension " + std::to_string(net.dim()));
  }
  if (net.a.size() != net.width()) throw InvalidInput("output layer size does not match width");
}

/// Pre-activations w_r . x_i, laid out m x n.
template <typename Scalar>
MatrixX<Scalar> preactivations(const NetworkState<Scalar>& net, const MatrixX<Scalar>& X) {
  return net.W * X.transpose();
}

/// Activation pattern 1{w_r . x_i >= 0}, m x n.
template <typename Scalar>
MatrixX<Scalar> activation_pattern(const MatrixX<Scalar>& preact) {
  return (preact.array() >= Scalar(0)).template cast<Scalar>();
}

}  // namespace detail

/// f_i = (1/sqrt(m)) sum_r a_r max(w_r . x_i, 0)
template <typename Scalar>
VectorX<Scalar> forward(const NetworkState<Scalar>& net, const MatrixX<Scalar>& X) {
  using std::sqrt;
  detail::require_matching_dim(net, X);
  const MatrixX<Scalar> hidden = detail::preactivations(net, X).cwiseMax(Scalar(0));
  return (hidden.transpose() * net.a) / sqrt(static_cast<Scalar>(net.width()));
}

/// 1/2 sum_i (f_i - y_i)^2, pairwise-summed.
template <typename Scalar>
Scalar loss(const VectorX<Scalar>& f, const VectorX<Scalar>& y) {
  if (f.size() != y.size()) throw InvalidInput("loss: prediction and label lengths differ");
  const VectorX<Scalar> sq = (f - y).array().square().matrix();
  return pairwise_sum(sq) / Scalar(2);
}

/// Gradient of the loss with respect to W for a given residual f - y.
/// Row r is (a_r/sqrt(m)) sum_i delta_i x_i 1{w_r . x_i >= 0}.
template <typename Scalar>
MatrixX<Scalar> grad_w(const NetworkState<Scalar>& net, const MatrixX<Scalar>& X,
                       const VectorX<Scalar>& residual) {
  using std::sqrt;
  detail::require_matching_dim(net, X);
  if (residual.size() != X.rows()) throw InvalidInput("grad_w: residual length mismatch");
  const MatrixX<Scalar> active = detail::activation_pattern(detail::preactivations(net, X));
  const VectorX<Scalar> row_scale = net.a / sqrt(static_cast<Scalar>(net.width()));
  return row_scale.asDiagonal() * ((active * residual.asDiagonal()) * X);
}

template <typename Scalar>
MatrixX<Scalar> grad_w(const NetworkState<Scalar>& net, const Dataset<Scalar>& data) {
  return grad_w(net, data.X, VectorX<Scalar>(forward(net, data.X) - data.y));
}

}  // namespace mntk
