#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mntk/data.hpp"
#include "mntk/optimizers.hpp"
#include "oracles.hpp"

using namespace mntk;

namespace {

/// One neuron, one sample x = 1 (d = 1), a = +1: while w > 0 the network is
/// f = w and the gradient is (w - y).
struct ScalarProblem {
  double w0 = 0.3;
  double y = 1.0;

  NetworkState<double> net() const {
    NetworkState<double> n;
    n.W = Eigen::MatrixXd::Constant(1, 1, w0);
    n.a = Eigen::VectorXd::Ones(1);
    n.W_prev = n.W;
    return n;
  }
  Dataset<double> data() const {
    return {Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, y)};
  }
};

std::vector<double> scalar_recursion(Method method, double w0, double y, double eta, double beta,
                                     int steps) {
  std::vector<double> w{w0};
  double prev = w0;
  double prev_g = w0 - y;
  for (int k = 0; k < steps; ++k) {
    const double cur = w.back();
    const double g = cur - y;
    double next = cur - eta * g;
    if (method != Method::GD) next += beta * (cur - prev);
    if (method == Method::NAG) next -= beta * eta * (g - prev_g);
    prev = cur;
    prev_g = g;
    w.push_back(next);
  }
  return w;
}

Dataset<double> benchmark_data(std::uint64_t seed) {
  Rng rng(seed);
  return gen_synthetic(20, 10, rng);
}

}  // namespace

TEST_CASE("gd_step: stationary point and zero step") {
  Rng rng(1);
  const Eigen::MatrixXd X = oracle::random_unit_rows(3, 2, 1);
  auto net = init_network(4, 2, rng);
  const Dataset<double> exact{X, forward(net, X)};
  const auto next = gd_step(net, exact, 0.5);
  CHECK(next.W == net.W);

  net.W_prev = net.W * 0.5;
  const Dataset<double> data{X, Eigen::VectorXd::Ones(3)};
  const auto still = gd_step(net, data, 0.0);
  CHECK(still.W == net.W);
  CHECK(still.W_prev == net.W);
}

TEST_CASE("gd_step matches the scalar recursion") {
  ScalarProblem p;
  auto net = p.net();
  const auto ref = scalar_recursion(Method::GD, p.w0, p.y, 0.3, 0.0, 10);
  for (int k = 1; k <= 10; ++k) {
    net = gd_step(net, p.data(), 0.3);
    CHECK(std::abs(net.W(0, 0) - ref[k]) < 1e-12);
  }
}

TEST_CASE("hb_step: beta = 0 is GD bitwise; pure momentum step") {
  Rng rng(2);
  const Dataset<double> data = benchmark_data(2);
  auto net = init_network(30, 10, rng);
  net.W_prev = net.W + 0.01 * Eigen::MatrixXd::Ones(30, 10);
  CHECK(hb_step(net, data, 0.1, 0.0) == gd_step(net, data, 0.1));

  const Dataset<double> exact{data.X, forward(net, data.X)};
  const Eigen::MatrixXd D = net.W - net.W_prev;
  const auto moved = hb_step(net, exact, 0.1, 0.9);
  CHECK((moved.W - (net.W + 0.9 * D)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(moved.W_prev == net.W);
}

TEST_CASE("hb_step and nag_step match scalar recursions over 10 steps") {
  ScalarProblem p;
  const double eta = 0.2, beta = 0.9;
  const auto hb_ref = scalar_recursion(Method::HB, p.w0, p.y, eta, beta, 10);
  const auto nag_ref = scalar_recursion(Method::NAG, p.w0, p.y, eta, beta, 10);
  auto hb = p.net();
  auto nag = p.net();
  Eigen::MatrixXd prev_grad = grad_w(nag, p.data());
  for (int k = 1; k <= 10; ++k) {
    hb = hb_step(hb, p.data(), eta, beta);
    auto [next, g] = nag_step(nag, prev_grad, p.data(), eta, beta);
    nag = std::move(next);
    prev_grad = std::move(g);
    REQUIRE(hb.W(0, 0) > 0.0);
    REQUIRE(nag.W(0, 0) > 0.0);
    CHECK(std::abs(hb.W(0, 0) - hb_ref[k]) < 1e-12);
    CHECK(std::abs(nag.W(0, 0) - nag_ref[k]) < 1e-12);
  }
}

TEST_CASE("nag_step degenerate cases") {
  Rng rng(3);
  const Dataset<double> data = benchmark_data(3);
  auto net = init_network(25, 10, rng);
  net.W_prev = net.W - 0.02 * Eigen::MatrixXd::Ones(25, 10);
  const Eigen::MatrixXd g_prev = Eigen::MatrixXd::Constant(25, 10, 0.3);

  auto [nag0, g0] = nag_step(net, g_prev, data, 0.1, 0.0);
  CHECK(nag0 == gd_step(net, data, 0.1));

  const Eigen::MatrixXd g_now = grad_w(net, data);
  auto [nag_same, g1] = nag_step(net, g_now, data, 0.1, 0.8);
  CHECK(nag_same == hb_step(net, data, 0.1, 0.8));
  CHECK(g1 == g_now);

  CHECK_THROWS_AS(nag_step(net, Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)), data, 0.1, 0.8), InvalidInput);
}

TEST_CASE("train: empty run and config validation") {
  Rng rng(4);
  const Dataset<double> data = benchmark_data(4);
  const auto net0 = init_network(50, 10, rng);
  const auto records = train(net0, data, {Method::HB, 0.1, 0.9, 0, 10});
  REQUIRE(records.size() == 1);
  CHECK(records[0].step == 0);
  CHECK(records[0].loss == doctest::Approx(loss(forward(net0, data.X), data.y)));
  CHECK(records[0].max_displacement == 0.0);

  CHECK_THROWS_AS(train(net0, data, {Method::HB, 0.0, 0.9, 10, 1}), InvalidInput);
  CHECK_THROWS_AS(train(net0, data, {Method::HB, 0.1, 1.0, 10, 1}), InvalidInput);
  CHECK_THROWS_AS(train(net0, data, {Method::HB, 0.1, 0.5, 10, 0}), InvalidInput);
}

TEST_CASE("train: recording cadence includes the final step") {
  Rng rng(5);
  const Dataset<double> data = benchmark_data(5);
  const auto net0 = init_network(40, 10, rng);
  const auto records = train(net0, data, {Method::NAG, 0.1, 0.9, 25, 10});
  std::vector<long> steps;
  for (const auto& r : records) steps.push_back(r.step);
  CHECK(steps == std::vector<long>{0, 10, 20, 25});
  for (const auto& r : records) {
    CHECK(r.loss >= 0.0);
    CHECK(r.pseudo_loss >= 0.0);
    CHECK(r.t == doctest::Approx(double(r.step) * std::sqrt(0.1)));
  }
}

TEST_CASE("train: beta = 0 makes HB and NAG identical to GD bitwise") {
  Rng rng(6);
  const Dataset<double> data = benchmark_data(6);
  const auto net0 = init_network(60, 10, rng);
  const auto gd = train(net0, data, {Method::GD, 0.2, 0.0, 50, 5});
  const auto hb = train(net0, data, {Method::HB, 0.2, 0.0, 50, 5});
  const auto nag = train(net0, data, {Method::NAG, 0.2, 0.0, 50, 5});
  REQUIRE(gd.size() == hb.size());
  REQUIRE(gd.size() == nag.size());
  for (std::size_t k = 0; k < gd.size(); ++k) {
    CHECK(gd[k].loss == hb[k].loss);
    CHECK(gd[k].loss == nag[k].loss);
    CHECK(gd[k].max_displacement == nag[k].max_displacement);
  }
}

TEST_CASE("train: determinism") {
  const Dataset<double> data = benchmark_data(7);
  Rng r1(9), r2(9);
  const auto a = train(init_network(80, 10, r1), data, {Method::NAG, 0.1, 0.97, 40, 3});
  const auto b = train(init_network(80, 10, r2), data, {Method::NAG, 0.1, 0.97, 40, 3});
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].loss == b[k].loss);
    CHECK(a[k].lambda_min_H == b[k].lambda_min_H);
  }
}

TEST_CASE("train: divergence carries the partial trajectory") {
  Rng rng(8);
  const Dataset<double> data = benchmark_data(8);
  const auto net0 = init_network(50, 10, rng);
  try {
    train(net0, data, {Method::GD, 1e4, 0.0, 200, 1});
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK_FALSE(e.partial().empty());
    CHECK(e.partial().front().step == 0);
  }
}

TEST_CASE("train: GD reaches 1e-3 loss on the over-parameterized benchmark") {
  Rng data_rng(2024);
  const Dataset<double> data = gen_synthetic(20, 10, data_rng);
  const SpectrumReport spec = spectrum_report(ntk_limit_closed(data.X));
  Rng rng(1);
  const auto net0 = init_network(2000, 10, rng);
  const auto records = train(net0, data, {Method::GD, spec.lambda_m / 10.0, 0.0, 2000, 100});
  CHECK(records.back().loss < 1e-3);
  CHECK(records.back().loss < records.front().loss);
}

TEST_CASE("steps_to_threshold") {
  Trajectory t(3);
  t[0].loss = 10.0;
  t[1].step = 5;
  t[1].loss = 1.0;
  t[2].step = 10;
  t[2].loss = 0.05;
  CHECK(steps_to_threshold(t, 0.01) == 10);
  CHECK(steps_to_threshold(t, 0.001) == -1);
  CHECK(steps_to_threshold({}, 0.1) == -1);
}
