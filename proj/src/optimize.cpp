#include "cellflow/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cellflow/errors.hpp"

namespace cellflow {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::force_curve:
      return "force_curve";
    case LossKind::poisson_target:
      return "poisson_target";
    case LossKind::poisson_zero_both:
      return "poisson_zero_both";
  }
  return "?";
}

LossKind loss_kind_from_string(std::string_view name) {
  for (auto k : {LossKind::force_curve, LossKind::poisson_target, LossKind::poisson_zero_both}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

void LossSpec::validate() const {
  if (kind == LossKind::force_curve) {
    if (target.empty()) throw ConfigError("force_curve loss needs target samples");
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (!(target[i].strain > 0.0) || (i > 0 && !(target[i].strain > target[i - 1].strain))) {
        throw ConfigError("target strains must be positive and strictly increasing");
      }
      if (!std::isfinite(target[i].stress)) throw ConfigError("target stress is not finite");
    }
  }
  if (!(sign_weight >= 0.0 && weight_left >= 0.0 && weight_right >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

double LossSpec::threshold() const { return kind == LossKind::force_curve ? 1e-4 : 1e-2; }

LossSpec make_target_linear(double beta, double s0, int n) {
  if (!(beta > 0.0) || !(s0 > 0.0)) throw ConfigError("linear target needs beta > 0 and S0 > 0");
  if (n < 1) throw ConfigError("linear target needs at least one sample");
  LossSpec spec;
  spec.kind = LossKind::force_curve;
  const double c = beta * s0 / 0.1;
  for (int i = 1; i <= n; ++i) {
    const double eps = 0.1 * i / n;
    spec.target.push_back({eps, c * eps});
  }
  return spec;
}

LossSpec make_target_plateau(double slope, double eps_cr, int n) {
  if (!(eps_cr > 0.0 && eps_cr < 0.1)) throw ConfigError("plateau target needs 0 < eps_cr < 0.1");
  if (!(slope > 0.0)) throw ConfigError("plateau target needs a positive slope");
  if (n < 1) throw ConfigError("plateau target needs at least one sample");
  LossSpec spec;
  spec.kind = LossKind::force_curve;
  for (int i = 1; i <= n; ++i) {
    const double eps = 0.1 * i / n;
    spec.target.push_back({eps, slope * std::min(eps, eps_cr)});
  }
  return spec;
}

Problem make_problem(const WallpaperGroup& g, Mesh reference, const Material& mat,
                     const FlowConfig& flow, const LoadCase& load) {
  Problem p;
  p.group = g;
  p.envelope = mesh_envelope(g, reference, flow);
  p.min_angle_floor = std::min(10.0, 0.5 * reference.min_angle());
  p.reference = std::move(reference);
  p.material = mat;
  p.flow = flow;
  p.load = load;
  return p;
}

namespace {

// Increment index (1-based) whose strain magnitude matches eps.
int increment_for(const LoadCase& load, double eps) {
  for (int k = 1; k <= load.n_increments; ++k) {
    if (std::abs(std::abs(load.strain(k)) - eps) <= 1e-9 * std::max(1.0, eps)) return k;
  }
  throw ConfigError("target strain " + std::to_string(eps) + " is not a load increment");
}

// d(strip mean)/du as a dense vector.
Eigen::VectorXd strip_mean_gradient(const Mesh& mesh, BoundaryTag side) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * mesh.nodes.size()));
  const auto& strip = side == BoundaryTag::left ? mesh.left_strip : mesh.right_strip;
  const auto w = strip_weights(mesh, side);
  for (std::size_t i = 0; i < strip.size(); ++i) g[2 * strip[i]] += w[i];
  return g;
}

double hinge(double x) { return x > 0.0 ? x : 0.0; }

// Adds the loss of one solve and fills its partial derivatives.
double solve_loss(const Mesh& mesh, const LossSpec& spec, SolveState& s) {
  const auto& res = s.result;
  const LoadCase& load = res.load;
  s.stress_bar.assign(res.increments.size(), 0.0);
  s.final_u_bar = Eigen::VectorXd::Zero(res.u.size());
  const double sigma = load.sign();
  const double eps = load.strain(load.n_increments);
  const double H = mesh.height();
  double loss = 0.0;
  switch (spec.kind) {
    case LossKind::force_curve: {
      for (const auto& t : spec.target) {
        const int k = increment_for(load, t.strain);
        const double diff = sigma * res.increments[k - 1].stress - t.stress;
        loss += diff * diff;
        s.stress_bar[k - 1] += 2.0 * diff * sigma;
      }
      break;
    }
    case LossKind::poisson_target: {
      const StripMeans m = strip_means(mesh, res.u);
      const Eigen::VectorXd gl = strip_mean_gradient(mesh, BoundaryTag::left);
      const Eigen::VectorXd gr = strip_mean_gradient(mesh, BoundaryTag::right);
      const double nu = (m.left - m.right) / (H * eps);
      const double diff = nu - spec.nu_target;
      loss += diff * diff;
      s.final_u_bar += (2.0 * diff / (H * eps)) * (gl - gr);
      if (spec.sign_weight > 0.0 && spec.nu_target != 0.0) {
        const double sgn = spec.nu_target * eps > 0.0 ? 1.0 : -1.0;
        const double scale = H * std::abs(eps);
        const double pl = hinge(-sgn * m.left / scale), pr = hinge(sgn * m.right / scale);
        loss += spec.sign_weight * (pl * pl + pr * pr);
        s.final_u_bar += spec.sign_weight * (2.0 * pl * (-sgn / scale)) * gl;
        s.final_u_bar += spec.sign_weight * (2.0 * pr * (sgn / scale)) * gr;
      }
      break;
    }
    case LossKind::poisson_zero_both: {
      const StripMeans m = strip_means(mesh, res.u);
      const double scale = H * std::abs(eps);
      const double ml = m.left / scale, mr = m.right / scale;
      loss += spec.weight_left * ml * ml + spec.weight_right * mr * mr;
      s.final_u_bar += (2.0 * spec.weight_left * ml / scale) * strip_mean_gradient(mesh, BoundaryTag::left);
      s.final_u_bar += (2.0 * spec.weight_right * mr / scale) * strip_mean_gradient(mesh, BoundaryTag::right);
      break;
    }
  }
  return loss;
}

}  // namespace

Evaluation evaluate_loss(const Mlp& net, const Problem& problem, const LossSpec& spec) {
  Evaluation ev;
  try {
    DeformResult d = deform_mesh(problem.reference, net, problem.group, problem.flow, problem.envelope);
    ev.min_angle = d.min_angle;
    if (d.min_angle < problem.min_angle_floor) {
      ev.diagnostic = "deformed mesh minimum angle " + std::to_string(d.min_angle) + " below " +
                      std::to_string(problem.min_angle_floor);
      return ev;
    }
    ev.mesh = std::make_shared<Mesh>(std::move(d.mesh));
    ev.solver = std::make_shared<EquilibriumSolver>(*ev.mesh, problem.material, problem.newton);
    std::vector<LoadCase> loads{problem.load};
    if (spec.kind == LossKind::poisson_zero_both) {
      LoadCase t = problem.load, c = problem.load;
      t.mode = LoadMode::tension;
      c.mode = LoadMode::compression;
      loads = {t, c};
    }
    double loss = 0.0;
    for (const auto& load : loads) {
      SolveState s;
      s.result = solve_static(*ev.solver, load);
      loss += solve_loss(*ev.mesh, spec, s);
      ev.solves.push_back(std::move(s));
    }
    const auto& first = ev.solves.front().result;
    ev.nu_ef = first.nu_ef;
    ev.curve.push_back({0.0, 0.0});
    for (const auto& rec : first.increments) {
      ev.curve.push_back({std::abs(rec.strain), first.load.sign() * rec.stress});
    }
    ev.loss = loss;
    ev.ok = std::isfinite(loss);
    if (!ev.ok) ev.diagnostic = "loss is not finite";
  } catch (const ElementInversionError& e) {
    ev.diagnostic = e.what();
  } catch (const DivergenceError& e) {
    ev.diagnostic = e.what();
  } catch (const NonConvergenceError& e) {
    ev.diagnostic = e.what();
  } catch (const NonPositiveJacobianError& e) {
    ev.diagnostic = e.what();
  }
  if (!ev.ok) ev.loss = std::numeric_limits<double>::infinity();
  return ev;
}

Eigen::VectorXd adjoint_gradient(const Mlp& net, const Problem& problem, const LossSpec&,
                                 Evaluation& ev) {
  if (!ev.ok) throw Error("adjoint_gradient needs a successful evaluation");
  const Mesh& mesh = *ev.mesh;
  EquilibriumSolver& solver = *ev.solver;
  const Assembler& as = solver.assembler();
  const Material& mat = solver.material();
  const auto fixed = load_fixed_dofs(mesh);
  const auto n = static_cast<Eigen::Index>(as.num_dofs());

  // S = c_r . r with c_r = -1/W on the bottom vertical DOFs
  Eigen::VectorXd c_r = Eigen::VectorXd::Zero(n);
  for (int v : mesh.bottom_nodes) c_r[2 * v + 1] = -1.0 / mesh.width();

  std::vector<Vec2> x_bar(mesh.nodes.size(), Vec2::Zero());
  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> K = as.pattern();
  for (const auto& s : ev.solves) {
    const auto& incs = s.result.increments;
    for (std::size_t k = 0; k < incs.size(); ++k) {
      const bool last = k + 1 == incs.size();
      const double sb = s.stress_bar[k];
      if (sb == 0.0 && !(last && s.final_u_bar.squaredNorm() > 0.0)) continue;
      const Eigen::VectorXd& u = incs[k].u;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      if (sb != 0.0) {
        as.assemble(mat, u, r, &K);
        g = sb * (K * c_r);
      }
      if (last) g += s.final_u_bar;
      const Eigen::VectorXd lambda = solver.solve_adjoint(u, fixed, g);
      const Eigen::VectorXd w = sb * c_r - lambda;
      const auto contrib = as.residual_vjp_coords(mat, u, w);
      for (std::size_t v = 0; v < x_bar.size(); ++v) x_bar[v] += contrib[v];
    }
  }
  return flow_vjp(net, problem.group, problem.reference.nodes, problem.flow, x_bar, problem.envelope);
}

Eigen::VectorXd adam_delta(OptState& st, const Eigen::VectorXd& grad, const AdamOptions& opt) {
  if (!grad.allFinite()) throw NonFiniteGradientError("gradient has non-finite entries");
  if (st.m.size() != grad.size()) {
    st.m = Eigen::VectorXd::Zero(grad.size());
    st.v = Eigen::VectorXd::Zero(grad.size());
  }
  ++st.step;
  st.m = opt.beta1 * st.m + (1.0 - opt.beta1) * grad;
  st.v = opt.beta2 * st.v + (1.0 - opt.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(opt.beta1, st.step);
  const double c2 = 1.0 - std::pow(opt.beta2, st.step);
  Eigen::VectorXd delta(grad.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    delta[i] = -opt.lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + opt.eps);
  }
  return delta;
}

void adam_step(OptState& st, const Eigen::VectorXd& grad, const AdamOptions& opt) {
  st.theta += adam_delta(st, grad, opt);
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(restart + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

OptimizeResult optimize(const Problem& problem, const LossSpec& spec, const OptimizeOptions& options,
                        const StepCallback& on_step) {
  if (options.restarts < 1) throw ConfigError("optimizer needs at least one restart");
  std::vector<Mlp> init;
  for (int r = 0; r < options.restarts; ++r) {
    init.push_back(Mlp::random(options.arch, restart_seed(options.seed, r), options.init_scale));
  }
  return optimize_from(problem, spec, options, init, on_step);
}

void quality_correction(const Mlp& net, const Problem& problem, const Mesh& deformed,
                        const OptimizeOptions& options, Eigen::VectorXd& delta) {
  std::vector<Vec2> node_grad;
  const double c = soft_min_angle(deformed, options.quality_tau, &node_grad);
  const Eigen::VectorXd n =
      flow_vjp(net, problem.group, problem.reference.nodes, problem.flow, node_grad, problem.envelope);
  const double nn = n.squaredNorm();
  if (!(nn > 0.0) || !std::isfinite(nn)) return;
  const double target = problem.min_angle_floor + options.quality_margin;
  const double predicted = c + delta.dot(n);
  if (predicted < target) delta += ((target - predicted) / nn) * n;
}

OptimizeResult optimize_from(const Problem& problem, const LossSpec& spec,
                             const OptimizeOptions& options, const std::vector<Mlp>& initial,
                             const StepCallback& on_step) {
  if (options.budget < 1) throw ConfigError("optimizer budget must be at least 1");
  if (initial.empty()) throw ConfigError("optimizer needs at least one restart");
  spec.validate();
  const double threshold = options.threshold > 0.0 ? options.threshold : spec.threshold();

  OptimizeResult out;
  out.best = initial.front();
  bool any = false;
  int global_step = 0;
  for (std::size_t r = 0; r < initial.size(); ++r) {
    Mlp net = initial[r];
    OptState st;
    st.theta = net.param_vector();
    st.restart = static_cast<int>(r);
    st.seed = restart_seed(options.seed, static_cast<int>(r));
    Evaluation ev = evaluate_loss(net, problem, spec);
    out.initial_loss.push_back(ev.loss);
    if (!ev.ok) continue;
    double trust = 1.0;
    for (int step = 0; step < options.budget; ++step) {
      HistoryEntry h{global_step++, st.restart, ev.loss, ev.nu_ef};
      out.history.push_back(h);
      if (ev.loss < st.best_loss) {
        st.best_loss = ev.loss;
        st.best_theta = st.theta;
      }
      if (ev.loss < out.best_loss) {
        out.best_loss = ev.loss;
        out.best_nu_ef = ev.nu_ef;
        out.best_restart = st.restart;
        out.best = net;
        any = true;
      }
      if (on_step) on_step(h, st);
      if (ev.loss < threshold || step + 1 == options.budget) break;

      Eigen::VectorXd grad;
      try {
        grad = adjoint_gradient(net, problem, spec, ev);
      } catch (const SingularHessianError& e) {
        ++out.rejected;
        out.rejections.push_back(e.what());
        break;
      }
      Eigen::VectorXd delta = adam_delta(st, grad, options.adam);
      if (options.quality_band > 0.0 && ev.min_angle < problem.min_angle_floor + options.quality_band) {
        quality_correction(net, problem, *ev.mesh, options, delta);
      }
      bool accepted = false;
      for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        const Eigen::VectorXd trial = st.theta + trust * delta;
        Mlp cand = net;
        cand.set_params(std::span<const double>(trial.data(), static_cast<std::size_t>(trial.size())));
        Evaluation next = evaluate_loss(cand, problem, spec);
        if (next.ok) {
          st.theta = trial;
          net = std::move(cand);
          ev = std::move(next);
          trust = std::min(1.0, 2.0 * trust);
          accepted = true;
          break;
        }
        ++out.rejected;
        out.rejections.push_back(next.diagnostic);
        trust *= 0.5;
      }
      if (!accepted) break;
    }
  }
  if (!any) throw AllRestartsFailedError("no restart produced a valid evaluation");
  return out;
}

}  // namespace cellflow
