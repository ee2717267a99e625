#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cellflow/config.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/mechanics.hpp"
#include "cellflow/optimize.hpp"

namespace cellflow {

/// Reference shape, meshed problem and loss built from a config.
struct Setup {
  RunConfig config;
  ReferenceShape shape;
  Problem problem;
  LossSpec loss;
  /// Normalising stress of a linear target; the reference shape's S(0.1)
  /// unless the config fixes it.
  std::optional<double> s0;
};

ReferenceShape make_shape(const RunConfig& cfg);

/// with_loss = false skips the loss (and the reference solve it may need).
Setup make_setup(const RunConfig& cfg, bool with_loss = true);

/// Stress along the loading direction of the reference shape at strain 0.1.
double reference_stress(const Problem& problem);

OptimizeOptions optimize_options(const RunConfig& cfg);

/// (0, 0) followed by (signed strain, signed nominal stress) per increment.
std::vector<CurveSample> signed_curve(const SolveResult& result);

struct DesignSummary {
  double reference_loss = 0.0;  // theta = 0
  double reference_nu_ef = 0.0;
  double best_loss = 0.0;
  double best_nu_ef = 0.0;
  int best_restart = 0;
  int steps = 0;
  int rejected = 0;
  std::optional<double> s0;
};

/// Optimises the configured design and writes resolved_config.json,
/// history.csv, history.json, summary.json, checkpoint.json,
/// reference.svg, deformed.svg, deformed_mesh.txt and curve.csv to out_dir.
DesignSummary run_design(const RunConfig& cfg, const std::string& out_dir, std::ostream* log = nullptr);

struct SimulateSummary {
  double nu_ef = 0.0;
  std::vector<CurveSample> curve;  // signed
};

/// Deforms with the checkpointed flow (zero flow when empty), solves the
/// configured load and writes curve.csv, mesh.txt (deformed mesh with the
/// final displacement), reference.svg, deformed.svg, loaded.svg and
/// summary.json.
SimulateSummary run_simulate(const RunConfig& cfg, const std::string& checkpoint,
                             const std::string& out_dir);

/// reference.svg, deformed.svg and velocity.svg (the field at t = 0).
void run_render(const RunConfig& cfg, const std::string& checkpoint, const std::string& out_dir);

/// Creates out_dir and its parents.
void ensure_directory(const std::string& dir);

}  // namespace cellflow
