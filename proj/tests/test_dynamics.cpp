#include <cmath>

#include "benchmark.hpp"
#include "doctest.h"
#include "mntk/dynamics.hpp"
#include "mntk/theory.hpp"
#include "spectral_oracle.hpp"

using namespace mntk;

namespace {

GramMatrix<double> random_psd(Eigen::Index n, unsigned seed) {
  std::srand(seed);
  Eigen::MatrixXd A = Eigen::MatrixXd::Random(n, n);
  Eigen::MatrixXd H = A * A.transpose() / double(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
  H = 0.5 * (H + H.transpose()).eval();
  return make_gram(H);
}

ResidualState<double> random_state(Eigen::Index n, unsigned seed) {
  std::srand(seed);
  return {0.0, Eigen::VectorXd::Random(n), Eigen::VectorXd::Random(n)};
}

DynamicsConfig config(OdeSystem sys, double s, double lambda0, double t_end, double h = 1e-3) {
  DynamicsConfig cfg;
  cfg.system = sys;
  cfg.s = s;
  cfg.lambda0 = lambda0;
  cfg.b = std::sqrt(2.0 * lambda0);
  cfg.h = h;
  cfg.t_end = t_end;
  return cfg;
}

}  // namespace

TEST_CASE("gradient flow: equilibrium and scalar decay") {
  const auto H = make_gram(Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, 0.5)));
  auto cfg = config(OdeSystem::GF_RESIDUAL, 0.0, 0.5, 2.0, 0.01);
  const auto rest = gradient_flow_residual(H, Eigen::VectorXd(Eigen::VectorXd::Zero(1)), cfg);
  CHECK(rest.states.back().delta.isZero(0.0));
  const auto run = gradient_flow_residual(H, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), cfg);
  CHECK(run.states.back().t == 2.0);
  CHECK(std::abs(run.states.back().delta(0) - std::exp(-1.0)) < 1e-8);
}

TEST_CASE("gradient flow: generic 4x4 kernel against the spectral solution") {
  const auto H = random_psd(4, 3);
  const Eigen::VectorXd delta0 = Eigen::Vector4d(1.0, -0.5, 0.25, 2.0);
  const auto run = gradient_flow_residual(H, delta0, config(OdeSystem::GF_RESIDUAL, 0, 0.1, 3.0, 0.01));
  for (const auto& st : run.states) {
    CHECK((st.delta - oracle::flow_solution(H.H, delta0, st.t)).norm() < 1e-7);
  }
}

TEST_CASE("hb_residual_rhs: equilibrium, s = 0 limit and scalar oscillator") {
  const auto H = random_psd(5, 7);
  const ResidualState<double> zero{0.0, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5)};
  CHECK(hb_residual_rhs(zero, H, 0.3, 0.2).isZero(0.0));

  const auto st = random_state(5, 8);
  const double lambda0 = 0.2;
  CHECK((hb_residual_rhs(st, H, 0.0, lambda0) -
         lowres_residual_rhs(st, H, std::sqrt(2.0 * lambda0)))
            .cwiseAbs()
            .maxCoeff() < 1e-15);

  // Scalar H = lambda: D'' + sqrt(2 l0) D' + (1 + sqrt(l0 s/2)) lambda D = 0.
  const double lam = 0.8, s = 0.5;
  const auto Hs = make_gram(Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, lam)));
  auto cfg = config(OdeSystem::HB_HIGHRES, s, lambda0, 8.0);
  const auto run = integrate_residual(Hs, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), cfg);
  const double b = std::sqrt(2.0 * lambda0), k = (1.0 + std::sqrt(lambda0 * s / 2.0)) * lam;
  for (std::size_t i = 0; i < run.states.size(); i += 500) {
    CHECK(std::abs(run.states[i].delta(0) -
                   oracle::damped_oscillator(b, k, 1.0, 0.0, run.states[i].t)) < 1e-9);
  }
}

TEST_CASE("nag_residual_rhs: equilibrium, s = 0 and scalar oscillator") {
  const auto H = random_psd(5, 9);
  const ResidualState<double> zero{0.0, Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5)};
  CHECK(nag_residual_rhs(zero, H, 0.3, 0.2).isZero(0.0));
  const auto st = random_state(5, 10);
  CHECK(nag_residual_rhs(st, H, 0.0, 0.2) == hb_residual_rhs(st, H, 0.0, 0.2));

  const double lam = 0.8, s = 0.1, lambda0 = 0.3;
  const auto Hs = make_gram(Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, lam)));
  const auto run =
      integrate_residual(Hs, Eigen::VectorXd(Eigen::VectorXd::Ones(1)), config(OdeSystem::NAG_HIGHRES, s, lambda0, 8.0));
  const double b = std::sqrt(2.0 * lambda0) + std::sqrt(s) * lam;
  const double k = (1.0 + std::sqrt(lambda0 * s / 2.0)) * lam;
  for (std::size_t i = 0; i < run.states.size(); i += 500) {
    CHECK(std::abs(run.states[i].delta(0) -
                   oracle::damped_oscillator(b, k, 1.0, 0.0, run.states[i].t)) < 1e-9);
  }
}

TEST_CASE("lyapunov functions: zero state, resting state, direct evaluation") {
  const auto H = random_psd(4, 11);
  const double s = 0.4, l0 = 0.25;
  const ResidualState<double> zero{0.0, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
  CHECK(lyapunov_hb(zero, H, s, l0) == 0.0);
  CHECK(lyapunov_nag(zero, H, s, l0) == 0.0);

  auto rest = random_state(4, 12);
  rest.delta_dot.setZero();
  const double pseudo = 0.5 * rest.delta.dot(H.H * rest.delta);
  const double c = 1.0 + std::sqrt(l0 * s / 2.0);
  CHECK(std::abs(lyapunov_hb(rest, H, s, l0) - (c * pseudo + 0.5 * l0 * rest.delta.squaredNorm())) <
        1e-12);

  const auto st = random_state(4, 13);
  double quad = 0.0, dd = 0.0, mixed_hb = 0.0, mixed_nag = 0.0;
  for (int i = 0; i < 4; ++i) {
    double hd = 0.0;
    for (int j = 0; j < 4; ++j) {
      quad += st.delta(i) * H.H(i, j) * st.delta(j);
      hd += H.H(i, j) * st.delta(j);
    }
    dd += st.delta_dot(i) * st.delta_dot(i);
    const double m = st.delta_dot(i) + std::sqrt(2.0 * l0) * st.delta(i);
    mixed_hb += m * m;
    mixed_nag += (m + std::sqrt(s) * hd) * (m + std::sqrt(s) * hd);
  }
  CHECK(std::abs(lyapunov_hb(st, H, s, l0) - (c * quad / 2 + dd / 4 + mixed_hb / 4)) < 1e-12);
  CHECK(std::abs(lyapunov_nag(st, H, s, l0) - (c * quad / 2 + dd / 4 + mixed_nag / 4)) < 1e-12);
  CHECK(lyapunov_nag(st, H, 0.0, l0) == lyapunov_hb(st, H, 0.0, l0));
}

TEST_CASE("integrate_dynamics: empty integration and config errors") {
  const auto setup = bench::frozen_setup(200);
  auto cfg = config(OdeSystem::HB_HIGHRES, setup.spectrum.s_max, setup.spectrum.lambda0, 0.0);
  const auto run = integrate_dynamics(setup.net0, setup.data, cfg);
  REQUIRE(run.records.size() == 1);
  CHECK(run.records[0].t == 0.0);
  CHECK(run.records[0].lyapunov.has_value());
  CHECK(run.states[0].delta_dot.isZero(0.0));

  cfg.s = 1.5 * setup.spectrum.s_max;
  CHECK_THROWS_AS(integrate_dynamics(setup.net0, setup.data, cfg), InvalidInput);
  cfg.s = setup.spectrum.s_max;
  cfg.h = 0.0;
  CHECK_THROWS_AS(integrate_dynamics(setup.net0, setup.data, cfg), InvalidInput);
}

TEST_CASE("integrate_residual: frozen HB stays under the HB loss bound") {
  const auto setup = bench::frozen_setup();
  const double l0 = setup.spectrum.lambda0;
  auto cfg = config(OdeSystem::HB_HIGHRES, setup.spectrum.s_max, l0, 40.0, 0.01);
  cfg.record_every = 10;
  const auto run = integrate_residual(setup.H0, setup.delta0, cfg);
  const RateBundle bundle = make_rate_bundle(l0, cfg.s, run.records.front().pseudo_loss);
  for (const auto& r : run.records) {
    CHECK(r.residual_norm * r.residual_norm <= 2.0 * bound_curve(Method::HB, bundle, r.t));
  }
}

TEST_CASE("integrate_residual: high-resolution systems approach low resolution as s -> 0") {
  const auto setup = bench::frozen_setup(500);
  const double l0 = setup.spectrum.lambda0;
  auto low_cfg = config(OdeSystem::LOWRES, 0.0, l0, 10.0, 0.01);
  low_cfg.record_every = 50;
  const auto low = integrate_residual(setup.H0, setup.delta0, low_cfg);
  for (OdeSystem sys : {OdeSystem::HB_HIGHRES, OdeSystem::NAG_HIGHRES}) {
    double previous = INFINITY;
    for (double s : {0.1, 0.01, 0.001}) {
      auto cfg = config(sys, s, l0, 10.0, 0.01);
      cfg.record_every = 50;
      const auto high = integrate_residual(setup.H0, setup.delta0, cfg);
      REQUIRE(high.states.size() == low.states.size());
      double gap = 0.0;
      for (std::size_t i = 0; i < low.states.size(); ++i) {
        gap = std::max(gap, (high.states[i].delta - low.states[i].delta).norm());
      }
      CHECK(gap < previous);
      previous = gap;
    }
  }
}

TEST_CASE("integrate_dynamics: coupled weight-space run tracks the frozen kernel at m = 4000") {
  const auto setup = bench::frozen_setup(4000, 3);
  const double l0 = setup.spectrum.lambda0;
  auto cfg = config(OdeSystem::HB_HIGHRES, setup.spectrum.s_max, l0, 10.0, 0.02);
  cfg.record_every = 25;
  const auto frozen = integrate_dynamics(setup.net0, setup.data, cfg);
  cfg.kernel_mode = KernelMode::COUPLED;
  const auto coupled = integrate_dynamics(setup.net0, setup.data, cfg);
  REQUIRE(frozen.states.size() == coupled.states.size());
  double gap = 0.0;
  for (std::size_t i = 0; i < frozen.states.size(); ++i) {
    CHECK(frozen.states[i].t == coupled.states[i].t);
    gap = std::max(gap, (frozen.states[i].delta - coupled.states[i].delta).norm());
  }
  CHECK(gap < 0.05 * setup.delta0.norm());
  CHECK(coupled.records.back().loss < coupled.records.front().loss);
  CHECK(coupled.records.back().max_displacement > 0.0);
  // At rest the weight-space Delta' is zero too.
  CHECK(coupled.states.front().delta_dot.isZero(0.0));
}

TEST_CASE("integrate_dynamics: coupled NAG is consistent with frozen NAG") {
  const auto setup = bench::frozen_setup(2000, 4);
  const double l0 = setup.spectrum.lambda0;
  auto cfg = config(OdeSystem::NAG_HIGHRES, setup.spectrum.s_max, l0, 4.0, 0.02);
  cfg.record_every = 50;
  const auto frozen = integrate_dynamics(setup.net0, setup.data, cfg);
  cfg.kernel_mode = KernelMode::COUPLED;
  const auto coupled = integrate_dynamics(setup.net0, setup.data, cfg);
  REQUIRE(frozen.states.size() == coupled.states.size());
  for (std::size_t i = 0; i < frozen.states.size(); ++i) {
    CHECK((frozen.states[i].delta - coupled.states[i].delta).norm() < 0.05 * setup.delta0.norm());
  }
}
