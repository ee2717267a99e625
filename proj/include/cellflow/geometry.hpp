#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cellflow/flow.hpp"
#include "cellflow/symmetry.hpp"

namespace cellflow {

/// Rectangle Omega = origin + [0, width] x [0, height], tiled by
/// cells_x x cells_y conventional cells.
struct Domain {
  int cells_x = 3;
  int cells_y = 3;
  Vec2 origin = Vec2::Zero();
  double width = 3.0;
  double height = 3.0;

  Vec2 lo() const { return origin; }
  Vec2 hi() const { return origin + Vec2(width, height); }
};

/// Domain of cells_x x cells_y conventional cells of g, anchored at the
/// group's default origin unless one is given.
Domain make_domain(const WallpaperGroup& g, int cells_x, int cells_y);
Domain make_domain(const WallpaperGroup& g, int cells_x, int cells_y, const Vec2& origin);

/// Default anchor of Omega so that the default pores clear the corners.
Vec2 default_origin(const WallpaperGroup& g);

struct PoreSpec {
  /// Pore centres in fractional lattice coordinates; each is replicated by
  /// the full orbit of the group.
  std::vector<Vec2> centers;
  /// Number of polygon segments approximating each circle.
  int segments = 64;
};

/// Declared default pore layout for a group (one orbit of circles).
PoreSpec default_pores(const WallpaperGroup& g);

/// One tiled pore: circle plus the area-equivalent polygon used for meshing.
struct Pore {
  Vec2 center = Vec2::Zero();
  std::size_t rep = 0;  // coset representative mapping the seed pore here
  std::vector<Vec2> polygon;  // ccw, unclipped
  std::vector<Vec2> clipped;  // ccw, clipped to Omega
};

struct ReferenceShape {
  WallpaperGroup group;
  Domain domain;
  PoreSpec spec;
  double radius = 0.0;
  double target_fraction = 0.5;    // solid fraction
  double achieved_fraction = 0.5;  // with exact circles
  double polygon_fraction = 0.5;   // with the clipped polygons
  std::vector<Pore> pores;         // every image that meets Omega

  /// Polygon area of the solid part.
  double solid_area() const;
};

/// Minimum clearance between pores and between pores and the boundary, as
/// a fraction of the cell size.
inline constexpr double kClearanceFraction = 0.02;

/// Sizes the pores by bisection so the solid fraction of Omega equals
/// target_fraction. Throws InfeasibleFractionError when the clearance rules
/// cannot be met.
ReferenceShape build_reference_shape(const WallpaperGroup& g, const PoreSpec& pores,
                                     const Domain& domain, double target_fraction);

/// Area of the intersection of a disc with an axis-aligned rectangle.
double disc_rect_area(const Vec2& center, double r, const Vec2& lo, const Vec2& hi);

/// Clips a convex ccw polygon to an axis-aligned rectangle. Vertices created
/// on the rectangle edges carry the exact edge coordinate.
std::vector<Vec2> clip_to_rect(const std::vector<Vec2>& poly, const Vec2& lo, const Vec2& hi);

double polygon_area(const std::vector<Vec2>& poly);

enum class BoundaryTag : std::uint8_t { bottom, top, left, right, pore };

std::string_view to_string(BoundaryTag tag);

struct BoundaryEdge {
  int a = 0;
  int b = 0;  // a -> b runs with the solid on its left
  BoundaryTag tag = BoundaryTag::pore;
};

struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary;
  Vec2 lo = Vec2::Zero();  // reference box
  Vec2 hi = Vec2::Zero();
  std::vector<int> left_strip;   // nodes on x = lo.x within the middle half height
  std::vector<int> right_strip;  // nodes on x = hi.x within the middle half height
  std::vector<int> bottom_nodes;
  std::vector<int> top_nodes;

  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double area() const;
  double signed_area(std::size_t t) const;
  double min_angle() const;

  /// Rebuilds boundary edges, tags and node sets from connectivity and the
  /// reference box.
  void classify(double tol = 1e-9);
};

struct MeshOptions {
  double target_h = 0.1;
  double min_angle_deg = 25.0;
};

/// Conforming Delaunay mesh of the solid part of the shape.
Mesh mesh_shape(const ReferenceShape& shape, const MeshOptions& options);

/// Mesh of the full rectangle, used by tests and plate checks.
Mesh mesh_rectangle(const Vec2& lo, const Vec2& hi, const MeshOptions& options);

/// Smooth lower bound on the smallest interior angle of a mesh, in degrees:
/// -tau * log(sum exp(-angle / tau)). grad receives its derivative with
/// respect to every node.
double soft_min_angle(const Mesh& mesh, double tau_deg, std::vector<Vec2>* grad = nullptr);

struct DeformResult {
  Mesh mesh;
  double min_area_ratio = 1.0;
  double min_angle = 0.0;
};

/// Moves every node by the flow; connectivity and tags stay fixed. Throws
/// ElementInversionError when an element keeps 1e-3 or less of its area.
DeformResult deform_mesh(const Mesh& mesh, const Mlp& net, const WallpaperGroup& g,
                         const FlowConfig& cfg, const Envelope& env);

/// Envelope matching a domain and flow configuration.
Envelope domain_envelope(const WallpaperGroup& g, const Domain& d, const FlowConfig& cfg);
Envelope mesh_envelope(const WallpaperGroup& g, const Mesh& m, const FlowConfig& cfg);

}  // namespace cellflow
