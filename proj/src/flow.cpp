#include "cellflow/flow.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cellflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMeanPoints = 8;  // per side of the unit-cell quadrature grid

void check_points(std::size_t n_points, std::size_t n_cot) {
  if (n_points != n_cot) {
    throw std::invalid_argument("cotangent count " + std::to_string(n_cot) +
                                " does not match point count " + std::to_string(n_points));
  }
}

}  // namespace

void FlowConfig::validate() const {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("flow.t_max must be > 0");
  if (n_steps < 1) throw ConfigError("flow.n_steps must be >= 1");
  if (!(envelope_margin >= 0.0)) throw ConfigError("flow.envelope_margin must be >= 0");
}

void smoothstep(double s, double& q, double& dq, double& ddq) {
  if (s <= 0.0) {
    q = dq = ddq = 0.0;
    return;
  }
  if (s >= 1.0) {
    q = 1.0;
    dq = ddq = 0.0;
    return;
  }
  const double s2 = s * s;
  q = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
  dq = 30.0 * s2 * (1.0 - s) * (1.0 - s);
  ddq = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
}

Envelope::Envelope(Vec2 lo, Vec2 hi, double margin) : lo_(lo), hi_(hi), margin_(margin) {
  if (!(margin >= 0.0)) throw std::invalid_argument("envelope margin must be >= 0");
  if (!(hi.x() > lo.x() && hi.y() > lo.y())) throw std::invalid_argument("empty envelope box");
  trivial_ = margin == 0.0;
}

Envelope::Eval Envelope::eval(const Vec2& x) const {
  Eval e;
  if (trivial_) return e;
  const double inv = 1.0 / margin_;
  double f[2], df[2], ddf[2];
  for (int k = 0; k < 2; ++k) {
    double qa, dqa, ddqa, qb, dqb, ddqb;
    smoothstep((x[k] - lo_[k]) * inv, qa, dqa, ddqa);
    smoothstep((hi_[k] - x[k]) * inv, qb, dqb, ddqb);
    f[k] = qa * qb;
    df[k] = (dqa * qb - qa * dqb) * inv;
    ddf[k] = (ddqa * qb - 2.0 * dqa * dqb + qa * ddqb) * inv * inv;
  }
  e.value = f[0] * f[1];
  e.grad = Vec2(df[0] * f[1], f[0] * df[1]);
  e.hess << ddf[0] * f[1], df[0] * df[1], df[0] * df[1], f[0] * ddf[1];
  return e;
}

bool Envelope::is_one(const Vec2& x) const {
  if (trivial_) return true;
  return x.x() - lo_.x() > margin_ && hi_.x() - x.x() > margin_ && x.y() - lo_.y() > margin_ &&
         hi_.y() - x.y() > margin_;
}

PotentialEval stream_potential(const Mlp& net, const WallpaperGroup& g, const Vec2& x, double t,
                               const Envelope& env) {
  const Vec2 s = g.lattice_inverse() * x;
  const double c1 = std::cos(kTwoPi * s.x()), s1 = std::sin(kTwoPi * s.x());
  const double c2 = std::cos(kTwoPi * s.y()), s2 = std::sin(kTwoPi * s.y());
  const double u[5] = {c1, s1, c2, s2, t};
  double gu[5];
  MlpWorkspace ws;
  const double h = net.value_and_gradient(u, gu, ws);
  const Vec2 grad_s(kTwoPi * (-gu[0] * s1 + gu[1] * c1), kTwoPi * (-gu[2] * s2 + gu[3] * c2));
  const Vec2 grad_h = g.lattice_inverse().transpose() * grad_s;
  const Envelope::Eval e = env.eval(x);
  return {e.value * h, e.value * grad_h + h * e.grad};
}

Eigen::VectorXd lambda_nd(const Eigen::MatrixXd& jac) {
  const Eigen::Index n = jac.cols();
  if (jac.rows() != n * (n - 1) / 2) {
    throw std::invalid_argument("potential must have n(n-1)/2 components");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j, ++k) {
      out[i] += jac(k, j);
      out[j] -= jac(k, i);
    }
  }
  return out;
}

FlowField::FlowField(const WallpaperGroup& group, const Mlp& net, Envelope env)
    : group_(&group), net_(&net), env_(env) {
  if (net.architecture().input_dim != 5 || net.architecture().output_dim != 1) {
    throw std::invalid_argument("planar flow needs a network with 5 inputs and 1 output");
  }
  const auto reps = group.coset_reps();
  const double inv_order = 1.0 / static_cast<double>(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    frac_maps_.push_back(group.frac_linear(i).cast<double>());
    frac_shifts_.push_back(reps[i].b_frac);
    grad_maps_.push_back((group.lattice_inverse() * reps[i].A).transpose());
    signs_.push_back((reps[i].A.determinant() > 0.0 ? 1.0 : -1.0) * inv_order);
  }
  net.prepare(ws_);
}

PotentialEval FlowField::symmetric_potential(const Vec2& x, double t) const {
  PotentialEval out;
  const Vec2 s = group_->lattice_inverse() * x;
  double u[5];
  double gu[5];
  u[4] = t;
  for (std::size_t r = 0; r < signs_.size(); ++r) {
    const Vec2 sp = frac_maps_[r] * s + frac_shifts_[r];
    const double c1 = std::cos(kTwoPi * sp.x()), s1 = std::sin(kTwoPi * sp.x());
    const double c2 = std::cos(kTwoPi * sp.y()), s2 = std::sin(kTwoPi * sp.y());
    u[0] = c1;
    u[1] = s1;
    u[2] = c2;
    u[3] = s2;
    const double h = net_->value_and_gradient(u, gu, ws_);
    const Vec2 grad_s(kTwoPi * (-gu[0] * s1 + gu[1] * c1), kTwoPi * (-gu[2] * s2 + gu[3] * c2));
    out.value += signs_[r] * h;
    out.grad += signs_[r] * (grad_maps_[r] * grad_s);
  }
  return out;
}

FlowField::Mean& FlowField::mean_entry(double t, bool need_grad) const {
  auto it = means_.find(t);
  if (it != means_.end() && (!need_grad || !it->second.grad.empty())) return it->second;
  Mean m;
  if (need_grad) m.grad.assign(net_->num_params(), 0.0);
  const double w = 1.0 / (kMeanPoints * kMeanPoints);
  double u[5], du[5] = {0, 0, 0, 0, 0}, ub[5], dub[5];
  u[4] = t;
  for (int i = 0; i < kMeanPoints; ++i) {
    for (int j = 0; j < kMeanPoints; ++j) {
      const Vec2 s((i + 0.5) / kMeanPoints, (j + 0.5) / kMeanPoints);
      for (std::size_t r = 0; r < signs_.size(); ++r) {
        const Vec2 sp = frac_maps_[r] * s + frac_shifts_[r];
        u[0] = std::cos(kTwoPi * sp.x());
        u[1] = std::sin(kTwoPi * sp.x());
        u[2] = std::cos(kTwoPi * sp.y());
        u[3] = std::sin(kTwoPi * sp.y());
        double dh = 0.0;
        m.value += w * signs_[r] * net_->jvp(u, du, dh, ws_);
        if (need_grad) net_->jvp_backward(ws_, w * signs_[r], 0.0, m.grad.data(), ub, dub);
      }
    }
  }
  return means_[t] = std::move(m);
}

double FlowField::mean_potential(double t) const {
  if (env_.trivial()) return 0.0;
  return mean_entry(t, false).value;
}

PotentialEval FlowField::potential(const Vec2& x, double t) const {
  PotentialEval psi = symmetric_potential(x, t);
  if (env_.trivial()) return psi;
  psi.value -= mean_potential(t);
  const Envelope::Eval e = env_.eval(x);
  return {e.value * psi.value, e.value * psi.grad + psi.value * e.grad};
}

Vec2 FlowField::velocity(const Vec2& x, double t) const {
  const Vec2 grad = potential(x, t).grad;
  return lambda_field(grad);
}

Vec2 FlowField::velocity_vjp(const Vec2& x, double t, const Vec2& a, double* theta_bar) const {
  // a . H = w . grad(env psi) with w = J^T a
  const Vec2 w(-a.y(), a.x());
  const Envelope::Eval e = env_.eval(x);
  const double w_env = w.dot(e.grad);
  const Vec2 s = group_->lattice_inverse() * x;

  double psi = 0.0;
  double dpsi = 0.0;  // w . grad psi
  Vec2 x_bar = Vec2::Zero();
  double u[5], du[5], ub[5], dub[5];
  u[4] = t;
  du[4] = 0.0;
  for (std::size_t r = 0; r < signs_.size(); ++r) {
    const Vec2 sp = frac_maps_[r] * s + frac_shifts_[r];
    const Vec2 ds = grad_maps_[r].transpose() * w;
    const double c1 = std::cos(kTwoPi * sp.x()), s1 = std::sin(kTwoPi * sp.x());
    const double c2 = std::cos(kTwoPi * sp.y()), s2 = std::sin(kTwoPi * sp.y());
    u[0] = c1;
    u[1] = s1;
    u[2] = c2;
    u[3] = s2;
    du[0] = -kTwoPi * s1 * ds.x();
    du[1] = kTwoPi * c1 * ds.x();
    du[2] = -kTwoPi * s2 * ds.y();
    du[3] = kTwoPi * c2 * ds.y();
    double dh = 0.0;
    const double h = net_->jvp(u, du, dh, ws_);
    psi += signs_[r] * h;
    dpsi += signs_[r] * dh;

    net_->jvp_backward(ws_, w_env * signs_[r], e.value * signs_[r], theta_bar, ub, dub);
    const double k2 = kTwoPi * kTwoPi;
    const Vec2 s_bar(kTwoPi * (-ub[0] * s1 + ub[1] * c1) - k2 * (dub[0] * c1 + dub[1] * s1) * ds.x(),
                     kTwoPi * (-ub[2] * s2 + ub[3] * c2) - k2 * (dub[2] * c2 + dub[3] * s2) * ds.y());
    x_bar += grad_maps_[r] * s_bar;
  }
  if (!env_.trivial()) {
    const Mean& m = mean_entry(t, theta_bar != nullptr && w_env != 0.0);
    if (theta_bar && w_env != 0.0) {
      for (std::size_t p = 0; p < m.grad.size(); ++p) theta_bar[p] -= w_env * m.grad[p];
    }
    x_bar += (psi - m.value) * (e.hess * w) + dpsi * e.grad;
  }
  return x_bar;
}

Vec2 velocity(const Mlp& net, const WallpaperGroup& g, const Vec2& x, double t,
              const Envelope& env) {
  return FlowField(g, net, env).velocity(x, t);
}

std::vector<Vec2> flow_points(const Mlp& net, const WallpaperGroup& g,
                              const std::vector<Vec2>& points, const FlowConfig& cfg,
                              const Envelope& env) {
  return flow_points(net, g, points, 0.0, cfg.t_max, cfg.n_steps, env);
}

std::vector<Vec2> flow_points(const Mlp& net, const WallpaperGroup& g,
                              const std::vector<Vec2>& points, double t0, double t1,
                              int n_steps, const Envelope& env) {
  if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
  std::vector<Vec2> out(points.size());
  const FlowField field(g, net, env);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i] = rk4_integrate(field, points[i], t0, t1, n_steps);
    if (!out[i].allFinite()) {
      throw DivergenceError(i, "trajectory of point " + std::to_string(i) + " is not finite");
    }
  }
  return out;
}

Eigen::VectorXd flow_vjp(const Mlp& net, const WallpaperGroup& g,
                         const std::vector<Vec2>& points, const FlowConfig& cfg,
                         const std::vector<Vec2>& cotangents, const Envelope& env) {
  check_points(points.size(), cotangents.size());
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_params()));
  const int n = cfg.n_steps;
  if (n <= 0 || cfg.t_max == 0.0) return grad;
  const FlowField field(g, net, env);
  const double h = cfg.t_max / n;

  // stage positions per step: y1 = x_k, y2, y3, y4
  std::vector<Vec2> stages(static_cast<std::size_t>(n) * 4);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec2& c = cotangents[i];
    if (c.x() == 0.0 && c.y() == 0.0) continue;
    Vec2 x = points[i];
    for (int k = 0; k < n; ++k) {
      const double t = k * h;
      Vec2* y = &stages[static_cast<std::size_t>(k) * 4];
      y[0] = x;
      const Vec2 k1 = field.velocity(x, t);
      y[1] = x + 0.5 * h * k1;
      const Vec2 k2 = field.velocity(y[1], t + 0.5 * h);
      y[2] = x + 0.5 * h * k2;
      const Vec2 k3 = field.velocity(y[2], t + 0.5 * h);
      y[3] = x + h * k3;
      const Vec2 k4 = field.velocity(y[3], t + h);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) {
      throw DivergenceError(i, "trajectory of point " + std::to_string(i) + " is not finite");
    }

    Vec2 x_bar = c;
    for (int k = n; k-- > 0;) {
      const double t = k * h;
      const Vec2* y = &stages[static_cast<std::size_t>(k) * 4];
      const Vec2 k4_bar = (h / 6.0) * x_bar;
      Vec2 k3_bar = (h / 3.0) * x_bar;
      Vec2 k2_bar = (h / 3.0) * x_bar;
      Vec2 k1_bar = (h / 6.0) * x_bar;
      Vec2 acc = x_bar;

      Vec2 yb = field.velocity_vjp(y[3], t + h, k4_bar, grad.data());
      acc += yb;
      k3_bar += h * yb;
      yb = field.velocity_vjp(y[2], t + 0.5 * h, k3_bar, grad.data());
      acc += yb;
      k2_bar += 0.5 * h * yb;
      yb = field.velocity_vjp(y[1], t + 0.5 * h, k2_bar, grad.data());
      acc += yb;
      k1_bar += 0.5 * h * yb;
      acc += field.velocity_vjp(y[0], t, k1_bar, grad.data());
      x_bar = acc;
    }
  }
  return grad;
}

}  // namespace cellflow
