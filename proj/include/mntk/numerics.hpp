#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "mntk/errors.hpp"

namespace mntk {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Counter-based generator: draw k is a pure function of (seed, k), so
/// streams can be split by counter offset and replayed on any platform.
/// Normals come from Box-Muller; the second variate of each pair is cached
/// so that chunked draws concatenate to the same stream as one large draw.
class Rng {
 public:
  /// Counter distance between sibling substreams handed out by `substream`.
  static constexpr std::uint64_t kSubstreamStride = std::uint64_t{1} << 40;

  explicit Rng(std::uint64_t seed, std::uint64_t counter = 0) noexcept
      : seed_(seed), counter_(counter) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on (0, 1].
  double uniform() noexcept;
  double normal() noexcept;
  /// +1 or -1 with probability 1/2 each.
  int rademacher() noexcept;

  /// Independent stream `index` starting `index * kSubstreamStride` draws past
  /// the current counter. Does not advance *this.
  Rng substream(std::uint64_t index) const noexcept {
    return Rng(seed_, counter_ + (index + 1) * kSubstreamStride);
  }
  /// Moves the counter past `count` substreams.
  void skip_substreams(std::uint64_t count) noexcept {
    counter_ += count * kSubstreamStride;
    spare_.reset();
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
  std::optional<double> spare_;
};

/// `count` i.i.d. standard normals.
VectorX<double> sample_normal(Rng& rng, Eigen::Index count);
/// `count` i.i.d. Rademacher signs stored as +-1.0.
VectorX<double> sample_rademacher(Rng& rng, Eigen::Index count);

// ---------------------------------------------------------------------------
// Summation
// ---------------------------------------------------------------------------

/// Pairwise (cascade) summation in a fixed order; error grows as O(log n).
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> values) {
  constexpr std::size_t kBlock = 16;
  if (values.size() <= kBlock) {
    Scalar acc(0);
    for (const Scalar v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

template <typename Derived>
typename Derived::Scalar pairwise_sum(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> flat = v.derived().reshaped();
  return pairwise_sum(std::span<const Scalar>(flat.data(), static_cast<std::size_t>(flat.size())));
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues
// ---------------------------------------------------------------------------

template <typename Scalar>
struct EigenExtremes {
  Scalar lambda_min;
  Scalar lambda_max;
};

template <typename Derived>
void require_symmetric(const Eigen::MatrixBase<Derived>& M) {
  if (M.rows() != M.cols() || M.rows() < 1) {
    throw InvalidInput("symmetric matrix must be square with order >= 1");
  }
  if (!M.allFinite()) throw InvalidInput("matrix has non-finite entries");
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < M.rows(); ++i) {
      if (M(i, j) != M(j, i)) throw InvalidInput("matrix is not exactly symmetric");
    }
  }
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Sweeps stop once the off-diagonal Frobenius norm drops below
/// 1e-12 * ||M||_F.
template <typename Derived>
VectorX<typename Derived::Scalar> jacobi_eigenvalues(const Eigen::MatrixBase<Derived>& M) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  require_symmetric(M);

  MatrixX<Scalar> A = M;
  const Eigen::Index n = A.rows();
  const Scalar tolerance = Scalar(1e-12) * A.norm();
  constexpr int kMaxSweeps = 100;

  auto off_norm = [&A, n] {
    Scalar sum(0);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = j + 1; i < n; ++i) sum += A(i, j) * A(i, j);
    return sqrt(Scalar(2) * sum);
  };

  for (int sweep = 0; sweep < kMaxSweeps && off_norm() > tolerance; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = A(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (A(q, q) - A(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        // A <- J^T A J with J the (p, q) Givens rotation.
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = A(k, p);
          const Scalar akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = A(p, k);
          const Scalar aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = Scalar(0);
        A(q, p) = Scalar(0);
      }
    }
  }

  VectorX<Scalar> eigenvalues = A.diagonal();
  std::sort(eigenvalues.begin(), eigenvalues.end());
  return eigenvalues;
}

template <typename Derived>
EigenExtremes<typename Derived::Scalar> eig_extremes(const Eigen::MatrixBase<Derived>& M) {
  const auto ev = jacobi_eigenvalues(M);
  return {ev(0), ev(ev.size() - 1)};
}

/// Spectral norm of a symmetric matrix.
template <typename Derived>
typename Derived::Scalar symmetric_norm2(const Eigen::MatrixBase<Derived>& M) {
  using std::abs;
  const auto e = eig_extremes(M);
  return std::max(abs(e.lambda_min), abs(e.lambda_max));
}

// ---------------------------------------------------------------------------
// Fixed-step RK4
// ---------------------------------------------------------------------------

template <typename Scalar>
struct OdeState {
  Scalar t{0};
  VectorX<Scalar> y;
};

template <typename Scalar>
using VectorField = std::function<VectorX<Scalar>(Scalar t, const VectorX<Scalar>& y)>;

/// Classical fourth-order Runge-Kutta with constant step `h`; the last step
/// is shortened to land exactly on `t_end`. `observer(step_index, state)` is
/// called after every accepted step. Throws DivergenceError carrying the last
/// finite state if a step produces NaN/Inf.
template <typename Scalar, typename Field, typename Observer>
OdeState<Scalar> rk4_integrate(Field&& f, OdeState<Scalar> state, Scalar t_end, Scalar h,
                               Observer&& observer) {
  using std::ceil;
  if (!(h > Scalar(0))) throw InvalidInput("rk4_integrate: step must be positive");
  if (!(t_end >= state.t)) throw InvalidInput("rk4_integrate: t_end precedes start time");
  if (!state.y.allFinite()) throw InvalidInput("rk4_integrate: initial state is not finite");

  const Scalar t0 = state.t;
  const Scalar span = t_end - t0;
  // Tolerate representation error in span/h so that e.g. 1.0/0.01 gives 100 steps.
  const long steps = span > Scalar(0)
                         ? std::max(1L, static_cast<long>(ceil(span / h - Scalar(1e-9))))
                         : 0L;
  const Eigen::Index dim = state.y.size();

  for (long k = 1; k <= steps; ++k) {
    const Scalar t_next = (k == steps) ? t_end : t0 + static_cast<Scalar>(k) * h;
    const Scalar dt = t_next - state.t;
    const Scalar half = dt / Scalar(2);

    const VectorX<Scalar> k1 = f(state.t, state.y);
    const VectorX<Scalar> k2 = f(state.t + half, state.y + half * k1);
    const VectorX<Scalar> k3 = f(state.t + half, state.y + half * k2);
    const VectorX<Scalar> k4 = f(t_next, state.y + dt * k3);
    VectorX<Scalar> y_next = state.y + (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
    if (y_next.size() != dim) throw InvalidInput("rk4_integrate: vector field changed state length");

    if (!y_next.allFinite()) {
      throw DivergenceError("rk4_integrate: non-finite state at t=" + std::to_string(double(t_next)),
                            static_cast<double>(state.t), state.y.template cast<double>());
    }
    state.y = std::move(y_next);
    state.t = t_next;
    observer(k, std::as_const(state));
  }
  return state;
}

template <typename Scalar, typename Field>
OdeState<Scalar> rk4_integrate(Field&& f, OdeState<Scalar> state, Scalar t_end, Scalar h) {
  return rk4_integrate(std::forward<Field>(f), std::move(state), t_end, h,
                       [](long, const OdeState<Scalar>&) {});
}

/// Default step for the momentum ODEs: min(0.01, 0.1 / sqrt(lambda_m)).
inline double default_ode_step(double lambda_m) {
  return std::min(0.01, 0.1 / std::sqrt(lambda_m));
}

}  // namespace mntk
