#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "cellflow/errors.hpp"
#include "cellflow/mlp.hpp"
#include "cellflow/symmetry.hpp"

namespace cellflow {

struct FlowConfig {
  double t_max = 1.0;
  int n_steps = 32;
  /// Width of the boundary layer of the envelope, in units of the cell size.
  double envelope_margin = 0.25;

  void validate() const;
};

/// Smooth cutoff that is 1 deep inside an axis-aligned box and 0 on its
/// boundary. It is a product of one-sided quintic smoothsteps, one per side,
/// so it is C2 everywhere including near the corners.
class Envelope {
 public:
  struct Eval {
    double value = 1.0;
    Vec2 grad = Vec2::Zero();
    Mat2 hess = Mat2::Zero();
  };

  /// env = 1 everywhere.
  Envelope() = default;

  /// margin is in length units; margin == 0 also gives env = 1.
  Envelope(Vec2 lo, Vec2 hi, double margin);

  bool trivial() const noexcept { return trivial_; }
  const Vec2& lo() const noexcept { return lo_; }
  const Vec2& hi() const noexcept { return hi_; }
  double margin() const noexcept { return margin_; }

  double value(const Vec2& x) const { return eval(x).value; }
  Eval eval(const Vec2& x) const;

  /// True when env is exactly 1 in a neighbourhood of x.
  bool is_one(const Vec2& x) const;

 private:
  bool trivial_ = true;
  Vec2 lo_ = Vec2::Zero();
  Vec2 hi_ = Vec2::Zero();
  double margin_ = 0.0;
};

/// C2 quintic smoothstep clamped to [0,1], with first and second derivative.
void smoothstep(double s, double& q, double& dq, double& ddq);

struct PotentialEval {
  double value = 0.0;
  Vec2 grad = Vec2::Zero();
};

/// env(x) * h(rho(x), t) and its analytic spatial gradient. This is the raw
/// potential before group averaging.
PotentialEval stream_potential(const Mlp& net, const WallpaperGroup& g, const Vec2& x, double t,
                               const Envelope& env);

/// (d2 g, -d1 g): the 2D antisymmetrising operator applied to a gradient.
inline Vec2 lambda_field(const Vec2& grad) { return {grad.y(), -grad.x()}; }

/// General-n version: maps the Jacobian of a potential g with n(n-1)/2
/// components (rows, ordered (0,1),(0,2),...,(1,2),...) to the field
/// (Lambda g)_i = sum_j M_ij where M_ij = d_j g_ij and M_ji = -d_i g_ij.
Eigen::VectorXd lambda_nd(const Eigen::MatrixXd& potential_jacobian);

/// Velocity model H(x,t) = J grad(env * (psi - c(t))) with
/// psi(x,t) = (1/|G|) sum_phi det(A_phi) h(rho(phi x), t)
/// and c(t) the mean of psi over a unit cell. With env = 1 the constant has no
/// effect and H is the group average of the antisymmetrised raw potential, so
/// it is semi-invariant and exactly divergence free. Removing the mean keeps
/// the envelope from turning it into a circulation around the domain.
class FlowField {
 public:
  FlowField(const WallpaperGroup& group, const Mlp& net, Envelope env = {});

  const WallpaperGroup& group() const noexcept { return *group_; }
  const Mlp& net() const noexcept { return *net_; }
  const Envelope& envelope() const noexcept { return env_; }

  /// Symmetrised potential psi without the envelope.
  PotentialEval symmetric_potential(const Vec2& x, double t) const;

  /// Cell mean of psi (midpoint rule, exact up to round-off for the
  /// band-limited part). Zero for a trivial envelope.
  double mean_potential(double t) const;
  /// env * (psi - c).
  PotentialEval potential(const Vec2& x, double t) const;

  Vec2 velocity(const Vec2& x, double t) const;

  /// Adds d(a . H(x,t))/dtheta to theta_bar and returns d(a . H)/dx.
  Vec2 velocity_vjp(const Vec2& x, double t, const Vec2& a, double* theta_bar) const;

  /// Callable adaptor for rk4_integrate.
  Vec2 operator()(const Vec2& x, double t) const { return velocity(x, t); }

 private:
  const WallpaperGroup* group_;
  const Mlp* net_;
  Envelope env_;
  std::vector<Eigen::Matrix2d> frac_maps_;  // B^-1 A_phi B
  std::vector<Vec2> frac_shifts_;
  std::vector<Eigen::Matrix2d> grad_maps_;  // (B^-1 A_phi)^T
  std::vector<double> signs_;               // det(A_phi) / |G|
  mutable MlpWorkspace ws_;
  struct Mean {
    double value = 0.0;
    std::vector<double> grad;  // dc/dtheta, filled on first use
  };
  mutable std::map<double, Mean> means_;
  Mean& mean_entry(double t, bool need_grad) const;
};

/// Classical fixed-step RK4 for dx/dt = field(x, t) from t0 to t1.
template <class Field>
Vec2 rk4_integrate(const Field& field, Vec2 x, double t0, double t1, int n_steps) {
  if (n_steps <= 0 || t1 == t0) return x;
  const double h = (t1 - t0) / n_steps;
  for (int k = 0; k < n_steps; ++k) {
    const double t = t0 + k * h;
    const Vec2 k1 = field(x, t);
    const Vec2 k2 = field(Vec2(x + 0.5 * h * k1), t + 0.5 * h);
    const Vec2 k3 = field(Vec2(x + 0.5 * h * k2), t + 0.5 * h);
    const Vec2 k4 = field(Vec2(x + h * k3), t + h);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

/// H(x,t) for a single point; see FlowField.
Vec2 velocity(const Mlp& net, const WallpaperGroup& g, const Vec2& x, double t,
              const Envelope& env = {});

/// Flows every point from t = 0 to t = cfg.t_max. Throws DivergenceError on
/// the first non-finite trajectory.
std::vector<Vec2> flow_points(const Mlp& net, const WallpaperGroup& g,
                              const std::vector<Vec2>& points, const FlowConfig& cfg,
                              const Envelope& env = {});

/// Same, between arbitrary start and end times.
std::vector<Vec2> flow_points(const Mlp& net, const WallpaperGroup& g,
                              const std::vector<Vec2>& points, double t0, double t1,
                              int n_steps, const Envelope& env = {});

/// sum_i (dF(x_i)/dtheta)^T c_i for the discrete RK4 map.
Eigen::VectorXd flow_vjp(const Mlp& net, const WallpaperGroup& g,
                         const std::vector<Vec2>& points, const FlowConfig& cfg,
                         const std::vector<Vec2>& cotangents, const Envelope& env = {});

}  // namespace cellflow
