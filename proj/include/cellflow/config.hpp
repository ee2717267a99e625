#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cellflow/flow.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/mechanics.hpp"
#include "cellflow/mlp.hpp"
#include "cellflow/optimize.hpp"

namespace cellflow {

inline constexpr int kSchemaVersion = 1;

/// Target curve description for force_curve losses.
struct TargetConfig {
  std::string type = "linear";  // linear | plateau | samples
  double beta = 1.0;
  /// Normalising stress for linear targets; empty means the reference
  /// shape's stress at strain 0.1.
  std::optional<double> s0;
  double slope = 1.0;
  double eps_cr = 0.05;
  int samples = 10;
  std::vector<CurveSample> points;
};

struct LossConfig {
  LossKind kind = LossKind::poisson_target;
  double nu_target = -0.5;
  /// Weight of the one-sided displacement sign penalties; empty means 1 under
  /// compression and 0 under tension.
  std::optional<double> sign_weight;
  double weight_left = 1.0;
  double weight_right = 1.0;
  TargetConfig target;
};

struct OptimizerConfig {
  int budget = 300;
  double lr = 1e-3;
  int restarts = 3;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  int max_retries = 5;
  double threshold = 0.0;
  int checkpoint_every = 10;
};

struct VerifyConfig {
  double theta_scale = 0.15;
  int equivariance_points = 20;
  double equivariance_tol = 1e-6;
  int divergence_points = 100;
  double divergence_tol = 1e-5;
  double volume_tol = 1e-3;
  double mesh_volume_tol = 5e-3;
  int gradient_directions = 4;
  double gradient_tol = 1e-4;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string group = "p4";
  int cells_x = 3;
  int cells_y = 3;
  double cell_scale = 1.0;
  std::optional<Vec2> origin;  // default: the group's anchor
  std::vector<Vec2> pore_centers;  // empty: the group's default orbit
  int pore_segments = 64;
  double solid_fraction = 0.5;
  MeshOptions mesh;
  Material material;
  FlowConfig flow;
  MlpArchitecture arch;
  LoadCase load;
  NewtonOptions newton;
  double min_angle_floor = -1.0;  // negative: derived from the reference mesh
  LossConfig loss;
  OptimizerConfig optimizer;
  VerifyConfig verify;
  std::string output = "out";

  void validate() const;
};

/// Parses and validates a JSON document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

/// Every field, defaults included, as pretty-printed JSON.
std::string emit_config(const RunConfig& cfg);

}  // namespace cellflow
