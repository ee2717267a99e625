#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cellflow/flow.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/mechanics.hpp"
#include "cellflow/mlp.hpp"

namespace cellflow {

enum class LossKind { force_curve, poisson_target, poisson_zero_both };

std::string_view to_string(LossKind kind);
LossKind loss_kind_from_string(std::string_view name);

struct CurveSample {
  double strain = 0.0;  // magnitude
  double stress = 0.0;  // measured along the loading direction
};

struct LossSpec {
  LossKind kind = LossKind::poisson_target;
  /// force_curve: target samples, strictly increasing in strain.
  std::vector<CurveSample> target;
  /// poisson_target: desired effective Poisson ratio.
  double nu_target = 0.0;
  /// poisson_target: weight of the one-sided penalties that push the strip
  /// means towards the signs implied by nu_target.
  double sign_weight = 0.0;
  /// poisson_zero_both: weights on the squared normalised strip means.
  double weight_left = 1.0;
  double weight_right = 1.0;

  void validate() const;
  /// Loss below which optimisation stops.
  double threshold() const;
};

/// S = C eps through the origin with S(0.1) = beta * s0, sampled at
/// eps_i = 0.1 i / n, i = 1..n.
LossSpec make_target_linear(double beta, double s0, int n);

/// S = C eps up to eps_cr and C eps_cr beyond, sampled like the linear target.
LossSpec make_target_plateau(double slope, double eps_cr, int n);

/// Everything an evaluation needs besides the flow parameters.
struct Problem {
  WallpaperGroup group;
  Mesh reference;
  Material material;
  FlowConfig flow;
  Envelope envelope;
  /// Loading for force_curve and poisson_target; poisson_zero_both runs the
  /// tension and compression versions of it.
  LoadCase load;
  NewtonOptions newton;
  /// Deformed meshes with a smaller minimum angle are rejected.
  double min_angle_floor = 0.0;
};

/// Fills envelope and the angle floor from the reference mesh.
Problem make_problem(const WallpaperGroup& g, Mesh reference, const Material& mat,
                     const FlowConfig& flow, const LoadCase& load);

struct SolveState {
  SolveResult result;
  std::vector<double> stress_bar;  // dL/dS per increment
  Eigen::VectorXd final_u_bar;     // dL/du at the last increment, explicit part
};

struct Evaluation {
  bool ok = false;
  std::string diagnostic;
  double loss = std::numeric_limits<double>::infinity();
  double nu_ef = std::numeric_limits<double>::quiet_NaN();
  /// (0, 0) followed by one sample per increment of the first solve.
  std::vector<CurveSample> curve;
  std::shared_ptr<Mesh> mesh;  // deformed
  std::shared_ptr<EquilibriumSolver> solver;
  std::vector<SolveState> solves;
  double min_angle = 0.0;
};

/// deform -> solve -> loss. Inversion, mesh quality and Newton failures
/// give ok = false with loss = +inf.
Evaluation evaluate_loss(const Mlp& net, const Problem& problem, const LossSpec& spec);

/// dL/dtheta of a successful evaluation. Throws SingularHessianError.
Eigen::VectorXd adjoint_gradient(const Mlp& net, const Problem& problem, const LossSpec& spec,
                                 Evaluation& eval);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptState {
  Eigen::VectorXd theta;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int step = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  int restart = 0;
  std::uint64_t seed = 0;
};

/// Bias-corrected ADAM increment for grad; updates the moments and step
/// count but not theta. Throws NonFiniteGradientError.
Eigen::VectorXd adam_delta(OptState& state, const Eigen::VectorXd& grad, const AdamOptions& opt);

/// theta += adam_delta(...).
void adam_step(OptState& state, const Eigen::VectorXd& grad, const AdamOptions& opt);

struct HistoryEntry {
  int step = 0;     // global across restarts
  int restart = 0;
  double loss = 0.0;
  double nu_ef = 0.0;
};

struct OptimizeOptions {
  int budget = 300;  // evaluations per restart
  int restarts = 3;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  int max_retries = 5;
  /// Within quality_band degrees of the angle floor, the step is corrected so
  /// the linearised soft minimum angle (smoothing quality_tau) stays
  /// quality_margin above the floor. A band <= 0 disables the correction.
  double quality_band = 3.0;
  double quality_margin = 1.0;
  double quality_tau = 0.5;
  /// <= 0 means the loss-specific default.
  double threshold = 0.0;
  AdamOptions adam;
  MlpArchitecture arch;
};

struct OptimizeResult {
  Mlp best;
  double best_loss = std::numeric_limits<double>::infinity();
  double best_nu_ef = 0.0;
  int best_restart = 0;
  std::vector<HistoryEntry> history;
  std::vector<double> initial_loss;  // first evaluation of each restart
  int rejected = 0;
  std::vector<std::string> rejections;  // diagnostics of rejected evaluations
};

/// Adds the multiple of d(soft min angle)/dtheta that lifts the linearised
/// soft minimum angle of the trial to floor + quality_margin; no change when
/// it is already there.
void quality_correction(const Mlp& net, const Problem& problem, const Mesh& deformed,
                        const OptimizeOptions& options, Eigen::VectorXd& delta);

/// Called after every accepted evaluation.
using StepCallback = std::function<void(const HistoryEntry&, const OptState&)>;

/// Per-restart seed derived from the master seed.
std::uint64_t restart_seed(std::uint64_t seed, int restart);

OptimizeResult optimize(const Problem& problem, const LossSpec& spec, const OptimizeOptions& options,
                        const StepCallback& on_step = {});

/// Runs optimize with explicit initial parameters for each restart.
OptimizeResult optimize_from(const Problem& problem, const LossSpec& spec,
                             const OptimizeOptions& options, const std::vector<Mlp>& initial,
                             const StepCallback& on_step = {});

}  // namespace cellflow
