#pragma once

#include <array>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace cellflow {

/// Planar straight line graph: points plus segments that must appear as
/// unions of mesh edges.
struct Pslg {
  std::vector<Eigen::Vector2d> points;
  std::vector<std::array<int, 2>> segments;
};

struct RefineOptions {
  double min_angle_deg = 25.0;
  double max_edge = std::numeric_limits<double>::infinity();
  /// Angle refinement is not attempted on triangles whose shortest edge is
  /// below this length; it bounds the work near small input angles.
  double min_edge = 0.0;
  std::size_t max_vertices = 400000;
  /// Region to keep and refine, tested at triangle centroids and at
  /// candidate Steiner points.
  std::function<bool(const Eigen::Vector2d&)> inside;
};

struct Triangulation {
  std::vector<Eigen::Vector2d> points;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
};

/// Conforming Delaunay triangulation of the PSLG with Ruppert refinement.
/// Deterministic for a given input. Throws MeshingError on failure.
Triangulation triangulate(const Pslg& pslg, const RefineOptions& options);

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);

/// Smallest interior angle of a triangle, in degrees.
double min_angle_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c);

}  // namespace cellflow
