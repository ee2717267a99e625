#include <doctest.h>

#include <cmath>
#include <random>

#include "cellflow/errors.hpp"
#include "cellflow/optimize.hpp"
#include "oracles.hpp"

using namespace cellflow;

namespace {

Problem tiny_problem(const char* group, LoadMode mode = LoadMode::tension) {
  const auto g = lookup_group(group);
  const auto d = make_domain(g, 1, 1);
  PoreSpec spec = default_pores(g);
  spec.segments = 24;
  const auto shape = build_reference_shape(g, spec, d, 0.5);
  Mesh m = mesh_shape(shape, MeshOptions{0.2, 25.0});
  FlowConfig flow;
  flow.n_steps = 8;
  Problem p = make_problem(g, std::move(m), Material{}, flow, LoadCase{mode, 0.05, 2});
  p.newton.rel_tol = 1e-13;
  return p;
}

Mlp with_params(const Mlp& base, const Eigen::VectorXd& theta) {
  Mlp out = base;
  out.set_params(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
  return out;
}

// Central differences of the loss along random directions.
void check_gradient(const Problem& p, const LossSpec& spec, std::uint64_t seed) {
  const Mlp net = Mlp::random({}, seed, 0.15);
  Evaluation ev = evaluate_loss(net, p, spec);
  CAPTURE(ev.diagnostic);
  REQUIRE(ev.ok);
  const Eigen::VectorXd grad = adjoint_gradient(net, p, spec, ev);
  const Eigen::VectorXd theta = net.param_vector();
  std::mt19937_64 gen(seed + 1);
  std::normal_distribution<double> nd;
  const double h = 1e-5;
  for (int dir = 0; dir < 3; ++dir) {
    Eigen::VectorXd d(theta.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = nd(gen);
    d /= d.norm();
    const double lp = evaluate_loss(with_params(net, theta + h * d), p, spec).loss;
    const double lm = evaluate_loss(with_params(net, theta - h * d), p, spec).loss;
    const double fd = (lp - lm) / (2 * h);
    const double an = grad.dot(d);
    CAPTURE(dir);
    CAPTURE(fd);
    CAPTURE(an);
    CHECK(std::abs(an - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3 * grad.norm()));
  }
}

}  // namespace

TEST_CASE("linear and plateau targets") {
  const auto lin = make_target_linear(1.0, 1.0, 2);
  REQUIRE(lin.target.size() == 2);
  CHECK(lin.target[0].strain == doctest::Approx(0.05));
  CHECK(lin.target[0].stress == doctest::Approx(0.5));
  CHECK(lin.target[1].strain == doctest::Approx(0.1));
  CHECK(lin.target[1].stress == doctest::Approx(1.0));
  CHECK(make_target_linear(0.1, 3.0, 10).target.back().stress == doctest::Approx(0.3));
  CHECK_THROWS_AS(make_target_linear(0.0, 1.0, 2), ConfigError);

  const auto pl = make_target_plateau(1.0, 0.05, 10);
  CHECK(pl.target[3].strain == doctest::Approx(0.04));
  CHECK(pl.target[3].stress == doctest::Approx(0.04));
  CHECK(pl.target[7].strain == doctest::Approx(0.08));
  CHECK(pl.target[7].stress == doctest::Approx(0.05));
  CHECK(pl.target[4].stress == doctest::Approx(pl.target[5].stress));
  CHECK_THROWS_AS(make_target_plateau(1.0, 0.1, 10), ConfigError);
}

TEST_CASE("adam updates") {
  AdamOptions opt;
  OptState st;
  st.theta = Eigen::VectorXd::Ones(3);
  adam_step(st, Eigen::VectorXd::Zero(3), opt);
  CHECK(st.theta == Eigen::VectorXd::Ones(3));

  OptState s1;
  s1.theta = Eigen::VectorXd::Zero(3);
  const Eigen::Vector3d g(2.0, -0.5, 1e-3);
  adam_step(s1, g, opt);
  for (int i = 0; i < 3; ++i) {
    CHECK(s1.theta[i] == doctest::Approx(-opt.lr * g[i] / (std::abs(g[i]) + opt.eps)).epsilon(1e-12));
    CHECK(std::abs(s1.theta[i] + opt.lr * (g[i] > 0 ? 1 : -1)) <= 1e-7);
  }
  Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(adam_step(s1, bad, opt), NonFiniteGradientError);
}

TEST_CASE("adam converges on a quadratic") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0), c(0.5, 3.0);
  Eigen::VectorXd target(10), curv(10);
  for (int i = 0; i < 10; ++i) {
    target[i] = u(gen);
    curv[i] = c(gen);
  }
  OptState st;
  st.theta = Eigen::VectorXd::Zero(10);
  for (int k = 0; k < 5000; ++k) adam_step(st, curv.cwiseProduct(st.theta - target), AdamOptions{});
  CHECK((st.theta - target).norm() <= 1e-3);
}

TEST_CASE("full pipeline gradient matches finite differences") {
  const Problem p = tiny_problem("p4");
  MESSAGE("tiny problem dofs: " << 2 * p.reference.nodes.size());
  SUBCASE("poisson target with sign penalty") {
    LossSpec spec;
    spec.nu_target = -0.5;
    spec.sign_weight = 1.0;
    check_gradient(p, spec, 3);
  }
  SUBCASE("force curve") {
    Problem q = p;
    q.load.final_strain = 0.1;
    LossSpec spec = make_target_linear(0.5, 2.0, 2);
    check_gradient(q, spec, 4);
  }
  SUBCASE("zero Poisson in tension and compression") {
    LossSpec spec;
    spec.kind = LossKind::poisson_zero_both;
    check_gradient(p, spec, 6);
  }
}

TEST_CASE("loss values at known states") {
  const Problem p = tiny_problem("p4");
  const Mlp zero;
  LossSpec spec;
  spec.nu_target = 0.0;
  const Evaluation ev = evaluate_loss(zero, p, spec);
  REQUIRE(ev.ok);
  const auto ref = solve_static(p.reference, p.material, p.load, p.newton);
  CHECK(ev.nu_ef == doctest::Approx(ref.nu_ef).epsilon(1e-12));
  CHECK(ev.loss == doctest::Approx(ref.nu_ef * ref.nu_ef).epsilon(1e-12));

  spec.nu_target = ev.nu_ef;
  CHECK(evaluate_loss(zero, p, spec).loss == 0.0);

  LossSpec curve;
  curve.kind = LossKind::force_curve;
  for (std::size_t i = 1; i < ev.curve.size(); ++i) curve.target.push_back(ev.curve[i]);
  const Evaluation same = evaluate_loss(zero, p, curve);
  CHECK(same.loss == 0.0);

  // literal sum of squares
  LossSpec shifted = curve;
  for (auto& t : shifted.target) t.stress += 0.1;
  CHECK(evaluate_loss(zero, p, shifted).loss == doctest::Approx(0.01 * curve.target.size()));

  LossSpec none;
  none.kind = LossKind::poisson_zero_both;
  none.weight_left = none.weight_right = 0.0;
  Mlp net = Mlp::random({}, 9, 0.15);
  Evaluation e2 = evaluate_loss(net, p, none);
  CAPTURE(e2.diagnostic);
  REQUIRE(e2.ok);
  CHECK(adjoint_gradient(net, p, none, e2).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("optimizer contract") {
  const Problem p = tiny_problem("p4");
  LossSpec spec;
  spec.nu_target = -0.5;
  OptimizeOptions opt;
  opt.budget = 0;
  CHECK_THROWS_AS(optimize(p, spec, opt), ConfigError);

  opt.budget = 1;
  opt.restarts = 1;
  const auto one = optimize_from(p, spec, opt, {Mlp{}});
  REQUIRE(one.history.size() == 1);
  CHECK(one.history[0].loss == evaluate_loss(Mlp{}, p, spec).loss);

  opt.budget = 5;
  opt.threshold = 1e9;
  CHECK(optimize(p, spec, opt).history.size() == 1);

  opt.threshold = 0.0;
  opt.restarts = 2;
  opt.seed = 11;
  opt.adam.lr = 0.01;
  const auto a = optimize(p, spec, opt);
  const auto b = optimize(p, spec, opt);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].nu_ef == b.history[i].nu_ef);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& h : a.history) best = std::min(best, h.loss);
  CHECK(a.best_loss == best);
}

TEST_CASE("quality correction lifts the predicted minimum angle") {
  const Problem p = tiny_problem("p4");
  const Mlp net = Mlp::random(MlpArchitecture{}, 4, 0.2);
  const DeformResult d = deform_mesh(p.reference, net, p.group, p.flow, p.envelope);
  OptimizeOptions opt;
  opt.quality_tau = 0.5;
  const double c = soft_min_angle(d.mesh, opt.quality_tau);
  Problem high = p;
  high.min_angle_floor = c;  // target c + margin
  opt.quality_margin = 0.5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Eigen::VectorXd delta(static_cast<Eigen::Index>(net.num_params()));
  for (auto& v : delta) v = 1e-4 * nd(rng);
  const Eigen::VectorXd before = delta;
  quality_correction(net, high, d.mesh, opt, delta);
  CHECK((delta - before).norm() > 0.0);
  // the corrected step raises the angle to first order
  const Eigen::VectorXd step = 1e-2 * (delta - before) / (delta - before).norm();
  Mlp moved = net;
  const Eigen::VectorXd theta = net.param_vector() + step;
  moved.set_params(std::span<const double>(theta.data(), static_cast<std::size_t>(theta.size())));
  const DeformResult d2 = deform_mesh(p.reference, moved, p.group, p.flow, p.envelope);
  CHECK(soft_min_angle(d2.mesh, opt.quality_tau) > c);

  Problem low = p;
  low.min_angle_floor = 1.0;
  Eigen::VectorXd same = before;
  quality_correction(net, low, d.mesh, opt, same);
  CHECK(same == before);
}
