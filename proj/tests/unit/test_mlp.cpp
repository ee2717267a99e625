#include <doctest.h>

#include <cmath>
#include <random>

#include "cellflow/mlp.hpp"
#include "oracles.hpp"

using namespace cellflow;

TEST_CASE("zero network evaluates to zero") {
  Mlp net;
  CHECK(net.num_params() == 5 * 10 + 10 + 10 * 10 + 10 + 10 + 1);
  Eigen::VectorXd u(5);
  u << 0.3, -0.2, 1.0, 0.5, 0.7;
  CHECK(net.eval(u)[0] == 0.0);
  CHECK_THROWS_AS(net.eval(Eigen::VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("one hidden unit by hand") {
  Mlp net(MlpArchitecture{2, {1}, 1});
  // W1 = [0.5, -1], b1 = 0.25, W2 = [2], b2 = -0.1
  const double p[] = {0.5, -1.0, 0.25, 2.0, -0.1};
  net.set_params(p);
  Eigen::VectorXd u(2);
  u << 1.0, 0.0;
  CHECK(net.eval(u)[0] == doctest::Approx(2.0 * std::tanh(0.75) - 0.1).epsilon(1e-15));
  const Eigen::MatrixXd j = net.input_jacobian(u);
  const double s = 1.0 - std::tanh(0.75) * std::tanh(0.75);
  CHECK(j(0, 0) == doctest::Approx(2.0 * s * 0.5));
  CHECK(j(0, 1) == doctest::Approx(-2.0 * s));
}

TEST_CASE("input gradient matches central differences") {
  const Mlp net = Mlp::random({}, 3, 0.8);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> uu(-1, 1);
  MlpWorkspace ws;
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd u(5);
    for (int i = 0; i < 5; ++i) u[i] = uu(gen);
    double g[5];
    const double v = net.value_and_gradient(u.data(), g, ws);
    CHECK(v == doctest::Approx(net.eval(u)[0]).epsilon(1e-14));
    const Eigen::MatrixXd jac = net.input_jacobian(u);
    for (int i = 0; i < 5; ++i) {
      const double h = 1e-6;
      Eigen::VectorXd up = u, um = u;
      up[i] += h;
      um[i] -= h;
      const double fd = (net.eval(up)[0] - net.eval(um)[0]) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-7 * std::max(1.0, std::abs(g[i])));
      CHECK(std::abs(jac(0, i) - g[i]) <= 1e-14);
    }
  }
}

TEST_CASE("jvp backward matches finite differences of the seeded objective") {
  const Mlp base = Mlp::random({}, 9, 0.8);
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> uu(-1, 1);
  double u[5], du[5];
  for (int i = 0; i < 5; ++i) {
    u[i] = uu(gen);
    du[i] = uu(gen);
  }
  const double a = 0.7, b = -1.3;
  auto objective = [&](const Mlp& net, const double* uu_, const double* duu) {
    MlpWorkspace ws;
    double dout = 0.0;
    const double out = net.jvp(uu_, duu, dout, ws);
    return a * out + b * dout;
  };
  MlpWorkspace ws;
  double dout = 0.0;
  base.jvp(u, du, dout, ws);
  std::vector<double> pg(base.num_params(), 0.0);
  double ub[5], dub[5];
  base.jvp_backward(ws, a, b, pg.data(), ub, dub);

  const double h = 1e-6;
  for (std::size_t k = 0; k < base.num_params(); k += 7) {
    Mlp p = base, m = base;
    p.params()[k] += h;
    m.params()[k] -= h;
    const double fd = (objective(p, u, du) - objective(m, u, du)) / (2 * h);
    CHECK(std::abs(fd - pg[k]) <= 1e-7 * std::max(1.0, std::abs(pg[k])));
  }
  for (int i = 0; i < 5; ++i) {
    double up[5], um[5];
    std::copy(u, u + 5, up);
    std::copy(u, u + 5, um);
    up[i] += h;
    um[i] -= h;
    const double fd_u = (objective(base, up, du) - objective(base, um, du)) / (2 * h);
    CHECK(std::abs(fd_u - ub[i]) <= 1e-7 * std::max(1.0, std::abs(ub[i])));
    std::copy(du, du + 5, up);
    std::copy(du, du + 5, um);
    up[i] += h;
    um[i] -= h;
    const double fd_du = (objective(base, u, up) - objective(base, u, um)) / (2 * h);
    CHECK(std::abs(fd_du - dub[i]) <= 1e-7 * std::max(1.0, std::abs(dub[i])));
  }
}

TEST_CASE("random init is bounded and reproducible") {
  const Mlp a = Mlp::random({}, 42);
  const Mlp b = Mlp::random({}, 42);
  const Mlp c = Mlp::random({}, 43);
  CHECK(a.param_vector() == b.param_vector());
  CHECK(a.param_vector() != c.param_vector());
  CHECK(a.param_vector().cwiseAbs().maxCoeff() <= 0.1);
  // last bias block is zero
  CHECK(a.params().back() == 0.0);
  CHECK(a.all_finite());
}
