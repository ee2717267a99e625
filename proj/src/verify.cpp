#include "cellflow/verify.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cellflow/errors.hpp"
#include "cellflow/flow.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/pipeline.hpp"

namespace cellflow {

bool VerifyReport::passed() const { return first_failure() == nullptr; }

const PropertyCheck* VerifyReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return &c;
  }
  return nullptr;
}

namespace {

PropertyCheck make_check(const char* name, double value, double tol, std::string detail = {}) {
  PropertyCheck c;
  c.name = name;
  c.value = value;
  c.tolerance = tol;
  c.passed = std::isfinite(value) && value <= tol;
  c.detail = std::move(detail);
  return c;
}

PropertyCheck failed(const char* name, double tol, const std::string& why) {
  PropertyCheck c;
  c.name = name;
  c.value = std::numeric_limits<double>::infinity();
  c.tolerance = tol;
  c.detail = why;
  return c;
}

PropertyCheck check_equivariance(const RunConfig& cfg, const WallpaperGroup& g, const Mlp& net,
                                 std::mt19937_64& gen) {
  const double tol = cfg.verify.equivariance_tol;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < cfg.verify.equivariance_points; ++i) pts.push_back(g.lattice() * Vec2(u(gen), u(gen)));
  try {
    const auto fx = flow_points(net, g, pts, cfg.flow);
    double worst = 0.0;
    for (const auto& phi : g.coset_reps()) {
      std::vector<Vec2> img;
      for (const auto& p : pts) img.push_back(apply_isometry(g, phi, p));
      const auto fimg = flow_points(net, g, img, cfg.flow);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        worst = std::max(worst, (fimg[i] - apply_isometry(g, phi, fx[i])).norm());
      }
    }
    return make_check("equivariance", worst, tol);
  } catch (const DivergenceError& e) {
    return failed("equivariance", tol, e.what());
  }
}

PropertyCheck check_divergence(const RunConfig& cfg, const Problem& p, const Mlp& net,
                               std::mt19937_64& gen) {
  const double tol = cfg.verify.divergence_tol;
  const FlowField field(p.group, net, p.envelope);
  const Vec2 lo = p.reference.lo, hi = p.reference.hi;
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  const double h = 1e-4 * std::max(1.0, (hi - lo).maxCoeff());
  const double t = 0.5 * cfg.flow.t_max;
  double worst = 0.0;
  for (int i = 0; i < cfg.verify.divergence_points; ++i) {
    const Vec2 x(ux(gen), uy(gen));
    const Vec2 ex(h, 0.0), ey(0.0, h);
    const double div = (field.velocity(x + ex, t).x() - field.velocity(x - ex, t).x() +
                        field.velocity(x + ey, t).y() - field.velocity(x - ey, t).y()) /
                       (2.0 * h);
    worst = std::max(worst, std::abs(div) / (1.0 + field.velocity(x, t).norm()));
  }
  return make_check("divergence", worst, tol);
}

PropertyCheck check_volume(const RunConfig& cfg, const Problem& p, const Mlp& net) {
  const double tol = cfg.verify.volume_tol;
  const Vec2 c = 0.5 * (p.reference.lo + p.reference.hi);
  const double half = 0.25 * p.group.lattice().colwise().norm().minCoeff();
  const int per_side = 400;
  std::vector<Vec2> square;
  const Vec2 corners[4] = {c + Vec2(-half, -half), c + Vec2(half, -half), c + Vec2(half, half),
                           c + Vec2(-half, half)};
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < per_side; ++i) {
      square.push_back(corners[s] + (corners[(s + 1) % 4] - corners[s]) * (double(i) / per_side));
    }
  }
  try {
    const auto moved = flow_points(net, p.group, square, cfg.flow, p.envelope);
    const double a0 = polygon_area(square);
    const double rel = std::abs(polygon_area(moved) - a0) / a0;
    return make_check("volume", rel, tol);
  } catch (const DivergenceError& e) {
    return failed("volume", tol, e.what());
  }
}

PropertyCheck check_mesh_volume(const RunConfig& cfg, const Problem& p, const Mlp& net) {
  const double tol = cfg.verify.mesh_volume_tol;
  try {
    const DeformResult dm = deform_mesh(p.reference, net, p.group, cfg.flow, p.envelope);
    const double a0 = p.reference.area();
    return make_check("mesh_volume", std::abs(dm.mesh.area() - a0) / a0, tol);
  } catch (const Error& e) {
    return failed("mesh_volume", tol, e.what());
  }
}

PropertyCheck check_gradient(const RunConfig& cfg, const Setup& setup, const Mlp& net,
                             std::mt19937_64& gen) {
  const double tol = cfg.verify.gradient_tol;
  Problem p = setup.problem;
  p.newton.rel_tol = std::min(p.newton.rel_tol, 1e-12);
  p.min_angle_floor = 0.0;
  Evaluation ev = evaluate_loss(net, p, setup.loss);
  if (!ev.ok) return failed("gradient", tol, "evaluation failed: " + ev.diagnostic);
  Eigen::VectorXd grad;
  try {
    grad = adjoint_gradient(net, p, setup.loss, ev);
  } catch (const Error& e) {
    return failed("gradient", tol, e.what());
  }
  const Eigen::VectorXd theta = net.param_vector();
  std::normal_distribution<double> nd;
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < cfg.verify.gradient_directions; ++k) {
    Eigen::VectorXd d(theta.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = nd(gen);
    d /= d.norm();
    auto at = [&](double s) {
      Mlp m = net;
      const Eigen::VectorXd v = theta + s * d;
      m.set_params(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
      return evaluate_loss(m, p, setup.loss).loss;
    };
    const double fd = (at(h) - at(-h)) / (2.0 * h);
    const double an = grad.dot(d);
    worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(fd), 1e-3 * grad.norm(), 1e-300}));
  }
  std::ostringstream ss;
  ss << cfg.verify.gradient_directions << " directions, |grad| " << grad.norm();
  return make_check("gradient", worst, tol, ss.str());
}

}  // namespace

VerifyReport run_verify(const RunConfig& cfg) {
  const Setup setup = make_setup(cfg);
  const Problem& p = setup.problem;
  const Mlp net = Mlp::random(cfg.arch, cfg.optimizer.seed, cfg.verify.theta_scale);
  std::mt19937_64 gen(cfg.optimizer.seed);
  VerifyReport r;
  r.checks.push_back(check_equivariance(cfg, p.group, net, gen));
  r.checks.push_back(check_divergence(cfg, p, net, gen));
  r.checks.push_back(check_volume(cfg, p, net));
  r.checks.push_back(check_mesh_volume(cfg, p, net));
  if (cfg.verify.gradient_directions > 0) r.checks.push_back(check_gradient(cfg, setup, net, gen));
  return r;
}

}  // namespace cellflow
