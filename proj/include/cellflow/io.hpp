#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cellflow/flow.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/mlp.hpp"
#include "cellflow/optimize.hpp"

namespace cellflow {

/// Serialized flow parameters.
struct Checkpoint {
  MlpArchitecture arch;
  std::vector<double> params;
  std::uint64_t seed = 0;
  int step = 0;
  double best_loss = 0.0;
  std::string config;  // resolved config JSON, may be empty
};

Checkpoint make_checkpoint(const Mlp& net, std::uint64_t seed, int step, double best_loss,
                           const std::string& config_json = {});
std::string checkpoint_to_json(const Checkpoint& cp);
Checkpoint checkpoint_from_json(const std::string& text);
void write_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& path);

/// The network stored in cp. Throws CheckpointMismatchError when its
/// architecture differs from expected or the weight count is wrong.
Mlp checkpoint_network(const Checkpoint& cp, const MlpArchitecture& expected);

/// Plain-text mesh: "N M", N lines "x y" (or "x y ux uy" with a displacement),
/// M lines "i j k". Numbers use %.17g.
void write_mesh(std::ostream& out, const Mesh& mesh, const Eigen::VectorXd* u = nullptr);

struct MeshFile {
  Mesh mesh;
  Eigen::VectorXd u;  // empty without displacement columns
};

/// Reads the format above; a fourth integer on triangle lines is accepted and
/// ignored. The boundary and node sets are rebuilt from the triangles.
MeshFile read_mesh(std::istream& in);

/// "epsilon,S" with one row per sample.
void write_curve_csv(std::ostream& out, const std::vector<CurveSample>& curve);
/// "step,loss,nu_ef".
void write_history_csv(std::ostream& out, const std::vector<HistoryEntry>& history);

/// Closed boundary loops of a mesh as node index sequences.
std::vector<std::vector<int>> boundary_loops(const Mesh& mesh);

/// World box drawn on the 800 x 800 canvas; the same view for the reference
/// and deformed shapes keeps deformation at true scale.
struct SvgView {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();
};

/// The reference box of mesh with a 15% pad, room for 10% strain.
SvgView default_view(const Mesh& mesh);

/// Solid region filled with even-odd rule so pores render as holes.
std::string render_mesh_svg(const Mesh& mesh, const SvgView& view, bool draw_triangles = false);

/// Arrows of H(x, t) on an n x n grid over [lo, hi].
std::string render_quiver_svg(const Mlp& net, const WallpaperGroup& g, const Envelope& env,
                              const Vec2& lo, const Vec2& hi, double t, int n = 24);

void write_text(const std::string& path, const std::string& text);

}  // namespace cellflow
