#include "cellflow/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cellflow/errors.hpp"
#include "cellflow/io.hpp"
#include "json.hpp"

namespace cellflow {

using json = nlohmann::ordered_json;

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string path_in(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

void write_csv(const std::string& path, const std::vector<CurveSample>& curve) {
  std::ostringstream ss;
  write_curve_csv(ss, curve);
  write_text(path, ss.str());
}

bool is_increment(const LoadCase& load, double eps) {
  for (int k = 1; k <= load.n_increments; ++k) {
    if (std::abs(std::abs(load.strain(k)) - eps) <= 1e-9 * std::max(1.0, eps)) return true;
  }
  return false;
}

Mlp load_network(const RunConfig& cfg, const std::string& checkpoint) {
  if (checkpoint.empty()) return Mlp(cfg.arch);
  return checkpoint_network(read_checkpoint(checkpoint), cfg.arch);
}

}  // namespace

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

ReferenceShape make_shape(const RunConfig& cfg) {
  const WallpaperGroup g = lookup_group(cfg.group, cfg.cell_scale);
  const Domain d = cfg.origin ? make_domain(g, cfg.cells_x, cfg.cells_y, *cfg.origin)
                              : make_domain(g, cfg.cells_x, cfg.cells_y);
  PoreSpec spec = default_pores(g);
  if (!cfg.pore_centers.empty()) spec.centers = cfg.pore_centers;
  spec.segments = cfg.pore_segments;
  return build_reference_shape(g, spec, d, cfg.solid_fraction);
}

double reference_stress(const Problem& p) {
  const LoadCase load{p.load.mode, 0.1, p.load.n_increments};
  const SolveResult res = solve_static(p.reference, p.material, load, p.newton);
  return load.sign() * res.increments.back().stress;
}

Setup make_setup(const RunConfig& cfg, bool with_loss) {
  cfg.validate();
  Setup s;
  s.config = cfg;
  s.shape = make_shape(cfg);
  Mesh mesh = mesh_shape(s.shape, cfg.mesh);
  s.problem = make_problem(s.shape.group, std::move(mesh), cfg.material, cfg.flow, cfg.load);
  s.problem.newton = cfg.newton;
  if (cfg.min_angle_floor >= 0.0) s.problem.min_angle_floor = cfg.min_angle_floor;
  if (!with_loss) return s;

  const LossConfig& lc = cfg.loss;
  switch (lc.kind) {
    case LossKind::poisson_target:
      s.loss.kind = lc.kind;
      s.loss.nu_target = lc.nu_target;
      s.loss.sign_weight = lc.sign_weight.value_or(cfg.load.mode == LoadMode::compression ? 1.0 : 0.0);
      break;
    case LossKind::poisson_zero_both:
      s.loss.kind = lc.kind;
      s.loss.weight_left = lc.weight_left;
      s.loss.weight_right = lc.weight_right;
      break;
    case LossKind::force_curve: {
      const TargetConfig& t = lc.target;
      if (t.type == "linear") {
        s.s0 = t.s0 ? *t.s0 : reference_stress(s.problem);
        if (!(*s.s0 > 0.0)) throw ConfigError("reference stress at strain 0.1 is not positive");
        s.loss = make_target_linear(t.beta, *s.s0, t.samples);
      } else if (t.type == "plateau") {
        s.loss = make_target_plateau(t.slope, t.eps_cr, t.samples);
      } else {
        s.loss.kind = LossKind::force_curve;
        s.loss.target = t.points;
      }
      break;
    }
  }
  s.loss.validate();
  for (const auto& t : s.loss.target) {
    if (!is_increment(cfg.load, t.strain)) {
      throw ConfigError("target strain " + std::to_string(t.strain) +
                        " does not coincide with a load increment");
    }
  }
  return s;
}

OptimizeOptions optimize_options(const RunConfig& cfg) {
  OptimizeOptions o;
  o.budget = cfg.optimizer.budget;
  o.restarts = cfg.optimizer.restarts;
  o.seed = cfg.optimizer.seed;
  o.init_scale = cfg.optimizer.init_scale;
  o.max_retries = cfg.optimizer.max_retries;
  o.threshold = cfg.optimizer.threshold;
  o.adam.lr = cfg.optimizer.lr;
  o.arch = cfg.arch;
  return o;
}

std::vector<CurveSample> signed_curve(const SolveResult& result) {
  std::vector<CurveSample> out{{0.0, 0.0}};
  for (const auto& inc : result.increments) out.push_back({inc.strain, inc.stress});
  return out;
}

DesignSummary run_design(const RunConfig& cfg, const std::string& out_dir, std::ostream* log) {
  const Setup setup = make_setup(cfg);
  ensure_directory(out_dir);
  const std::string resolved = emit_config(cfg);
  write_text(path_in(out_dir, "resolved_config.json"), resolved);
  const Problem& p = setup.problem;
  const SvgView view = default_view(p.reference);
  write_text(path_in(out_dir, "reference.svg"), render_mesh_svg(p.reference, view));

  DesignSummary sum;
  sum.s0 = setup.s0;
  const Evaluation ref = evaluate_loss(Mlp(cfg.arch), p, setup.loss);
  sum.reference_loss = ref.loss;
  sum.reference_nu_ef = ref.nu_ef;
  if (log) {
    *log << "nodes " << p.reference.nodes.size() << ", triangles " << p.reference.triangles.size()
         << ", reference loss " << ref.loss << ", nu_ef " << ref.nu_ef << "\n";
  }

  const OptimizeOptions opt = optimize_options(cfg);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  const auto checkpoint = [&](int step) {
    if (best_theta.size() == 0) return;
    Mlp net(cfg.arch);
    net.set_params(std::span<const double>(best_theta.data(), static_cast<std::size_t>(best_theta.size())));
    write_checkpoint(path_in(out_dir, "checkpoint.json"),
                     make_checkpoint(net, cfg.optimizer.seed, step, best, resolved));
  };
  const auto on_step = [&](const HistoryEntry& h, const OptState& st) {
    if (h.loss < best) {
      best = h.loss;
      best_theta = st.theta;
    }
    if (log) {
      *log << "step " << h.step << " restart " << h.restart << " loss " << h.loss << " nu_ef " << h.nu_ef
           << std::endl;
    }
    if ((h.step + 1) % cfg.optimizer.checkpoint_every == 0) checkpoint(h.step);
  };
  const OptimizeResult res = optimize(p, setup.loss, opt, on_step);
  sum.best_loss = res.best_loss;
  sum.best_nu_ef = res.best_nu_ef;
  sum.best_restart = res.best_restart;
  sum.steps = static_cast<int>(res.history.size());
  sum.rejected = res.rejected;
  checkpoint(res.history.back().step);

  {
    std::ostringstream ss;
    write_history_csv(ss, res.history);
    write_text(path_in(out_dir, "history.csv"), ss.str());
    json h = json::array();
    for (const auto& e : res.history) {
      h.push_back({{"step", e.step}, {"restart", e.restart}, {"loss", finite_or_null(e.loss)},
                   {"nu_ef", finite_or_null(e.nu_ef)}});
    }
    write_text(path_in(out_dir, "history.json"), h.dump(2) + "\n");
  }

  Evaluation fin = evaluate_loss(res.best, p, setup.loss);
  if (!fin.ok) throw Error("best design failed to re-evaluate: " + fin.diagnostic);
  write_text(path_in(out_dir, "deformed.svg"), render_mesh_svg(*fin.mesh, view));
  {
    const SolveResult& sr = fin.solves.front().result;
    write_csv(path_in(out_dir, "curve.csv"), signed_curve(sr));
    std::ostringstream ss;
    write_mesh(ss, *fin.mesh, &sr.u);
    write_text(path_in(out_dir, "deformed_mesh.txt"), ss.str());
  }

  json j;
  j["group"] = cfg.group;
  j["loss"] = std::string(to_string(setup.loss.kind));
  j["s0"] = setup.s0 ? json(*setup.s0) : json(nullptr);
  j["reference_loss"] = finite_or_null(sum.reference_loss);
  j["reference_nu_ef"] = finite_or_null(sum.reference_nu_ef);
  json init = json::array();
  for (double v : res.initial_loss) init.push_back(finite_or_null(v));
  j["initial_loss"] = init;
  j["best_loss"] = finite_or_null(sum.best_loss);
  j["best_restart"] = sum.best_restart;
  j["nu_ef"] = finite_or_null(fin.nu_ef);
  j["steps"] = sum.steps;
  j["rejected"] = sum.rejected;
  j["min_angle"] = fin.min_angle;
  write_text(path_in(out_dir, "summary.json"), j.dump(2) + "\n");
  return sum;
}

SimulateSummary run_simulate(const RunConfig& cfg, const std::string& checkpoint,
                             const std::string& out_dir) {
  const Setup setup = make_setup(cfg, false);
  const Problem& p = setup.problem;
  const Mlp net = load_network(cfg, checkpoint);
  ensure_directory(out_dir);
  const DeformResult dm = deform_mesh(p.reference, net, p.group, p.flow, p.envelope);
  const SolveResult res = solve_static(dm.mesh, p.material, p.load, p.newton);

  SimulateSummary out;
  out.nu_ef = res.nu_ef;
  out.curve = signed_curve(res);
  write_csv(path_in(out_dir, "curve.csv"), out.curve);
  {
    std::ostringstream ss;
    write_mesh(ss, dm.mesh, &res.u);
    write_text(path_in(out_dir, "mesh.txt"), ss.str());
  }
  const SvgView view = default_view(p.reference);
  write_text(path_in(out_dir, "reference.svg"), render_mesh_svg(p.reference, view));
  write_text(path_in(out_dir, "deformed.svg"), render_mesh_svg(dm.mesh, view));
  Mesh loaded = dm.mesh;
  for (std::size_t i = 0; i < loaded.nodes.size(); ++i) {
    loaded.nodes[i] += Vec2(res.u[2 * i], res.u[2 * i + 1]);
  }
  write_text(path_in(out_dir, "loaded.svg"), render_mesh_svg(loaded, view));

  json j;
  j["group"] = cfg.group;
  j["load"] = p.load.mode == LoadMode::tension ? "tension" : "compression";
  j["nu_ef"] = finite_or_null(res.nu_ef);
  j["final_strain"] = out.curve.back().strain;
  j["final_stress"] = out.curve.back().stress;
  j["min_angle"] = dm.min_angle;
  write_text(path_in(out_dir, "summary.json"), j.dump(2) + "\n");
  return out;
}

void run_render(const RunConfig& cfg, const std::string& checkpoint, const std::string& out_dir) {
  const Setup setup = make_setup(cfg, false);
  const Problem& p = setup.problem;
  const Mlp net = load_network(cfg, checkpoint);
  ensure_directory(out_dir);
  const SvgView view = default_view(p.reference);
  write_text(path_in(out_dir, "reference.svg"), render_mesh_svg(p.reference, view));
  const DeformResult dm = deform_mesh(p.reference, net, p.group, p.flow, p.envelope);
  write_text(path_in(out_dir, "deformed.svg"), render_mesh_svg(dm.mesh, view));
  write_text(path_in(out_dir, "velocity.svg"),
             render_quiver_svg(net, p.group, p.envelope, p.reference.lo, p.reference.hi, 0.0));
}

}  // namespace cellflow
