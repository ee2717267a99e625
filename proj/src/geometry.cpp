#include "cellflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <string>

#include "cellflow/errors.hpp"
#include "cellflow/triangulation.hpp"

namespace cellflow {

namespace {

constexpr double kS3 = 1.7320508075688772;

double cell_scale(const WallpaperGroup& g) { return g.cell_size().x(); }

double cell_length(const WallpaperGroup& g) { return g.cell_size().minCoeff(); }

double wrap01(double c) {
  double r = c - std::floor(c);
  if (r > 1.0 - 1e-9 || r < 1e-9) r = 0.0;
  return r;
}

bool same_mod1(const Vec2& a, const Vec2& b) {
  for (int k = 0; k < 2; ++k) {
    double d = std::abs(a[k] - b[k]);
    d = std::min(d, 1.0 - d);
    if (d > 1e-9) return false;
  }
  return true;
}

double dist_to_rect(const Vec2& p, const Vec2& lo, const Vec2& hi) {
  const double dx = std::max({lo.x() - p.x(), 0.0, p.x() - hi.x()});
  const double dy = std::max({lo.y() - p.y(), 0.0, p.y() - hi.y()});
  return std::hypot(dx, dy);
}

// Area of {X^2 + Y^2 <= r^2, X <= x, Y <= y}.
double quadrant_area(double x, double y, double r) {
  if (x <= -r || y <= -r) return 0.0;
  const double a = std::min(x, r);
  // antiderivative of sqrt(r^2 - X^2)
  auto G = [r](double X) {
    X = std::clamp(X, -r, r);
    return 0.5 * (X * std::sqrt(std::max(r * r - X * X, 0.0)) + r * r * std::asin(X / r));
  };
  auto integrate = [&](double from, double to, auto&& f) {
    from = std::max(from, -r);
    to = std::min(to, a);
    return to > from ? f(from, to) : 0.0;
  };
  // 2 sqrt(r^2 - X^2) where the column lies entirely below y
  auto full = [&](double u, double v) { return 2.0 * (G(v) - G(u)); };
  // y + sqrt(r^2 - X^2) where the line y cuts the column
  auto cut = [&](double u, double v) { return y * (v - u) + (G(v) - G(u)); };
  if (y >= r) return integrate(-r, r, full);
  const double w = std::sqrt(r * r - y * y);
  if (y >= 0.0) {
    return integrate(-r, -w, full) + integrate(-w, w, cut) + integrate(w, r, full);
  }
  return integrate(-w, w, cut);
}

std::vector<Vec2> regular_polygon(const Vec2& c, double radius, int n) {
  std::vector<Vec2> p;
  p.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    p.emplace_back(c.x() + radius * std::cos(a), c.y() + radius * std::sin(a));
  }
  return p;
}

bool in_convex(const std::vector<Vec2>& poly, const Vec2& p) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    if (orient2d(poly[i], poly[(i + 1) % poly.size()], p) <= 0.0) return false;
  }
  return true;
}

struct Candidate {
  Vec2 center;
  std::size_t rep;
  std::size_t seed;
  Vec2 lattice_offset;  // cartesian shift applied after the rep
};

}  // namespace

Vec2 default_origin(const WallpaperGroup& g) {
  const std::string& n = g.name();
  const double s = cell_scale(g);
  if (n == "pg" || n == "p2mg") return s * Vec2(0.25, 0.75);
  if (n == "p6mm") return s * Vec2(0.0, -kS3 / 4.0);
  return Vec2::Zero();
}

PoreSpec default_pores(const WallpaperGroup& g) {
  const std::string& n = g.name();
  // cartesian positions for the unit cell size
  std::vector<Vec2> cart;
  const Vec2 tri(0.5, kS3 / 6.0);
  if (n == "p1" || n == "p2" || n == "pm") {
    cart = {Vec2(0.5, 0.5)};
  } else if (n == "p3" || n == "p3m1") {
    cart = {tri, 2.0 * tri};
  } else if (n == "p31m" || n == "p6") {
    cart = {tri};
  } else if (n == "p6mm") {
    cart = {Vec2(0.0, 0.0)};
  } else {
    cart = {Vec2(0.25, 0.25)};
  }
  PoreSpec spec;
  const Mat2 binv = g.lattice_inverse() * cell_scale(g);
  for (const auto& c : cart) spec.centers.push_back(binv * c);
  return spec;
}

Domain make_domain(const WallpaperGroup& g, int cells_x, int cells_y) {
  return make_domain(g, cells_x, cells_y, default_origin(g));
}

Domain make_domain(const WallpaperGroup& g, int cells_x, int cells_y, const Vec2& origin) {
  if (cells_x < 1 || cells_y < 1) throw std::invalid_argument("cell counts must be >= 1");
  Domain d;
  d.cells_x = cells_x;
  d.cells_y = cells_y;
  d.origin = origin;
  d.width = cells_x * g.cell_size().x();
  d.height = cells_y * g.cell_size().y();
  return d;
}

double disc_rect_area(const Vec2& c, double r, const Vec2& lo, const Vec2& hi) {
  if (r <= 0.0) return 0.0;
  const double x0 = lo.x() - c.x(), x1 = hi.x() - c.x();
  const double y0 = lo.y() - c.y(), y1 = hi.y() - c.y();
  const double a = quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) -
                   quadrant_area(x1, y0, r) + quadrant_area(x0, y0, r);
  return std::max(a, 0.0);
}

double polygon_area(const std::vector<Vec2>& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    a += u.x() * v.y() - v.x() * u.y();
  }
  return 0.5 * a;
}

std::vector<Vec2> clip_to_rect(const std::vector<Vec2>& poly, const Vec2& lo, const Vec2& hi) {
  std::vector<Vec2> out = poly;
  for (int side = 0; side < 4 && !out.empty(); ++side) {
    const int axis = side % 2;  // 0: x, 1: y
    const bool upper = side >= 2;
    const double bound = upper ? hi[axis] : lo[axis];
    auto inside = [&](const Vec2& p) { return upper ? p[axis] <= bound : p[axis] >= bound; };
    const double snap = 1e-12 * std::max(1.0, std::abs(bound));
    for (auto& p : out) {
      if (std::abs(p[axis] - bound) <= snap) p[axis] = bound;
    }
    std::vector<Vec2> next;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Vec2& a = out[i];
      const Vec2& b = out[(i + 1) % out.size()];
      const bool ia = inside(a), ib = inside(b);
      if (ia) next.push_back(a);
      if (ia != ib) {
        const double t = (bound - a[axis]) / (b[axis] - a[axis]);
        Vec2 q = a + t * (b - a);
        q[axis] = bound;
        next.push_back(q);
      }
    }
    // drop repeated vertices left by cuts through a vertex
    std::vector<Vec2> uniq;
    for (const auto& p : next) {
      if (uniq.empty() || (p - uniq.back()).norm() > 1e-12) uniq.push_back(p);
    }
    while (uniq.size() > 1 && (uniq.front() - uniq.back()).norm() <= 1e-12) uniq.pop_back();
    out.swap(uniq);
  }
  if (out.size() < 3) out.clear();
  return out;
}

double ReferenceShape::solid_area() const {
  double a = domain.width * domain.height;
  for (const auto& p : pores) a -= polygon_area(p.clipped);
  return a;
}

ReferenceShape build_reference_shape(const WallpaperGroup& g, const PoreSpec& spec,
                                     const Domain& domain, double target) {
  if (spec.centers.empty()) throw std::invalid_argument("at least one pore is required");
  if (spec.segments < 8) throw std::invalid_argument("pores need at least 8 segments");
  if (!(target > 0.0 && target < 1.0)) {
    throw InfeasibleFractionError("solid fraction " + std::to_string(target) +
                                  " is outside (0, 1)");
  }
  const Vec2 lo = domain.lo(), hi = domain.hi();
  const double L = cell_length(g);
  const double clearance = kClearanceFraction * L;
  const double r_max = L;

  // orbit of every seed centre, reduced into the unit cell
  struct Seed {
    Vec2 frac;
    std::size_t rep;
    std::size_t seed;
    Vec2 shift;  // integer shift removed by the reduction
  };
  std::vector<Seed> orbit;
  for (std::size_t s = 0; s < spec.centers.size(); ++s) {
    const Vec2& u = spec.centers[s];
    for (std::size_t r = 0; r < g.order(); ++r) {
      const Vec2 img = g.frac_linear(r).cast<double>() * u + g.coset_reps()[r].b_frac;
      const Vec2 red(wrap01(img.x()), wrap01(img.y()));
      bool dup = false;
      for (const auto& o : orbit) dup = dup || same_mod1(o.frac, red);
      if (!dup) orbit.push_back({red, r, s, (img - red).array().round().matrix()});
    }
  }

  // lattice translates that can reach Omega
  std::vector<Candidate> cands;
  const Mat2& B = g.lattice();
  const Vec2 flo = g.lattice_inverse() * lo, fhi = g.lattice_inverse() * hi;
  const Vec2 flo2 = g.lattice_inverse() * Vec2(lo.x(), hi.y());
  const Vec2 fhi2 = g.lattice_inverse() * Vec2(hi.x(), lo.y());
  const Vec2 fmin = flo.cwiseMin(fhi).cwiseMin(flo2).cwiseMin(fhi2);
  const Vec2 fmax = flo.cwiseMax(fhi).cwiseMax(flo2).cwiseMax(fhi2);
  const int pad = 3;
  for (int i = static_cast<int>(std::floor(fmin.x())) - pad; i <= std::ceil(fmax.x()) + pad; ++i) {
    for (int j = static_cast<int>(std::floor(fmin.y())) - pad; j <= std::ceil(fmax.y()) + pad;
         ++j) {
      for (const auto& o : orbit) {
        const Vec2 c = B * (o.frac + Vec2(i, j));
        if (dist_to_rect(c, lo, hi) < r_max + clearance) {
          cands.push_back({c, o.rep, o.seed, B * (Vec2(i, j) - o.shift)});
        }
      }
    }
  }

  const double area = domain.width * domain.height;
  auto solid_fraction = [&](double r) {
    double holes = 0.0;
    for (const auto& c : cands) holes += disc_rect_area(c.center, r, lo, hi);
    return 1.0 - holes / area;
  };

  const double f_lo = solid_fraction(clearance);
  if (target > f_lo) {
    throw InfeasibleFractionError(
        "solid fraction " + std::to_string(target) + " needs pores below the minimum radius " +
        std::to_string(clearance) + " (largest reachable fraction " + std::to_string(f_lo) + ")");
  }
  double a = clearance, b = r_max;
  if (solid_fraction(b) > target) {
    throw InfeasibleFractionError("solid fraction " + std::to_string(target) +
                                  " cannot be reached with the given pores");
  }
  for (int it = 0; it < 200 && b - a > 1e-15 * L; ++it) {
    const double m = 0.5 * (a + b);
    if (solid_fraction(m) > target) {
      a = m;
    } else {
      b = m;
    }
  }
  const double r = 0.5 * (a + b);

  // clearance rules on the tiled circles
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (dist_to_rect(cands[i].center, lo, hi) < r + clearance) active.push_back(i);
  }
  auto fail = [&](const std::string& why, const Vec2& where) {
    throw InfeasibleFractionError("solid fraction " + std::to_string(target) + " with radius " +
                                  std::to_string(r) + ": " + why + " near (" +
                                  std::to_string(where.x()) + ", " + std::to_string(where.y()) +
                                  ")");
  };
  for (std::size_t ii = 0; ii < active.size(); ++ii) {
    const Vec2& c = cands[active[ii]].center;
    for (std::size_t jj = ii + 1; jj < active.size(); ++jj) {
      if ((c - cands[active[jj]].center).norm() < 2.0 * r + clearance) {
        fail("pores closer than the clearance", c);
      }
    }
    const double d_line[4] = {c.x() - lo.x(), hi.x() - c.x(), c.y() - lo.y(), hi.y() - c.y()};
    for (double d : d_line) {
      const double ad = std::abs(d);
      if (ad < r + clearance && ad > r - clearance) fail("pore grazes the boundary", c);
    }
    const Vec2 corners[4] = {lo, hi, Vec2(lo.x(), hi.y()), Vec2(hi.x(), lo.y())};
    for (const auto& k : corners) {
      if ((c - k).norm() < r + clearance) fail("pore covers a corner", c);
    }
  }

  ReferenceShape shape{g, domain, spec, r, target, solid_fraction(r), 0.0, {}};

  // polygons: the seed polygon mapped by the rep keeps the tiling symmetric
  const int multiple = g.lattice_kind() == LatticeKind::hexagonal ? 12 : 4;
  const int n = ((spec.segments + multiple - 1) / multiple) * multiple;
  shape.spec.segments = n;
  const double R = r * std::sqrt(2.0 * std::numbers::pi / (n * std::sin(2.0 * std::numbers::pi / n)));
  for (std::size_t i : active) {
    const auto& cand = cands[i];
    const Vec2 seed_c = B * spec.centers[cand.seed];
    const auto seed_poly = regular_polygon(seed_c, R, n);
    const Isometry& phi = g.coset_reps()[cand.rep];
    Pore p;
    p.center = cand.center;
    p.rep = cand.rep;
    for (const auto& v : seed_poly) p.polygon.push_back(apply_isometry(g, phi, v) + cand.lattice_offset);
    if (phi.A.determinant() < 0) std::reverse(p.polygon.begin(), p.polygon.end());
    p.clipped = clip_to_rect(p.polygon, lo, hi);
    if (p.clipped.empty()) continue;
    shape.pores.push_back(std::move(p));
  }
  shape.polygon_fraction = shape.solid_area() / area;
  return shape;
}

std::string_view to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::bottom:
      return "bottom";
    case BoundaryTag::top:
      return "top";
    case BoundaryTag::left:
      return "left";
    case BoundaryTag::right:
      return "right";
    case BoundaryTag::pore:
      return "pore";
  }
  return "pore";
}

double Mesh::signed_area(std::size_t t) const {
  const auto& tr = triangles[t];
  return 0.5 * orient2d(nodes[tr[0]], nodes[tr[1]], nodes[tr[2]]);
}

double Mesh::area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
  return a;
}

double Mesh::min_angle() const {
  double m = 180.0;
  for (const auto& t : triangles) m = std::min(m, min_angle_deg(nodes[t[0]], nodes[t[1]], nodes[t[2]]));
  return m;
}

double soft_min_angle(const Mesh& mesh, double tau_deg, std::vector<Vec2>* grad) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  std::vector<double> angles;
  angles.reserve(3 * mesh.triangles.size());
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const Vec2 u = mesh.nodes[t[(k + 1) % 3]] - mesh.nodes[t[k]];
      const Vec2 v = mesh.nodes[t[(k + 2) % 3]] - mesh.nodes[t[k]];
      const double a = kDeg * std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v));
      angles.push_back(a);
      lowest = std::min(lowest, a);
    }
  }
  double z = 0.0;
  for (double a : angles) z += std::exp(-(a - lowest) / tau_deg);
  if (grad) {
    grad->assign(mesh.nodes.size(), Vec2::Zero());
    std::size_t i = 0;
    for (const auto& t : mesh.triangles) {
      for (int k = 0; k < 3; ++k, ++i) {
        const double w = std::exp(-(angles[i] - lowest) / tau_deg) / z;
        if (w < 1e-14) continue;
        const Vec2 u = mesh.nodes[t[(k + 1) % 3]] - mesh.nodes[t[k]];
        const Vec2 v = mesh.nodes[t[(k + 2) % 3]] - mesh.nodes[t[k]];
        // angle = arg(v) - arg(u)
        const Vec2 du = kDeg * w * Vec2(u.y(), -u.x()) / u.squaredNorm();
        const Vec2 dv = kDeg * w * Vec2(-v.y(), v.x()) / v.squaredNorm();
        (*grad)[t[(k + 1) % 3]] += du;
        (*grad)[t[(k + 2) % 3]] += dv;
        (*grad)[t[k]] -= du + dv;
      }
    }
  }
  return lowest - tau_deg * std::log(z);
}

void Mesh::classify(double tol) {
  const double scale = std::max({1.0, std::abs(lo.x()), std::abs(lo.y()), std::abs(hi.x()),
                                 std::abs(hi.y())});
  const double eps = tol * scale;
  std::map<std::pair<int, int>, int> directed;
  for (const auto& t : triangles) {
    for (int i = 0; i < 3; ++i) ++directed[{t[i], t[(i + 1) % 3]}];
  }
  boundary.clear();
  for (const auto& [e, count] : directed) {
    if (count != 1) throw MeshingError("non-manifold edge in mesh");
    if (directed.count({e.second, e.first})) continue;
    const Vec2& a = nodes[e.first];
    const Vec2& b = nodes[e.second];
    BoundaryTag tag = BoundaryTag::pore;
    if (std::abs(a.y() - lo.y()) <= eps && std::abs(b.y() - lo.y()) <= eps) {
      tag = BoundaryTag::bottom;
    } else if (std::abs(a.y() - hi.y()) <= eps && std::abs(b.y() - hi.y()) <= eps) {
      tag = BoundaryTag::top;
    } else if (std::abs(a.x() - lo.x()) <= eps && std::abs(b.x() - lo.x()) <= eps) {
      tag = BoundaryTag::left;
    } else if (std::abs(a.x() - hi.x()) <= eps && std::abs(b.x() - hi.x()) <= eps) {
      tag = BoundaryTag::right;
    }
    boundary.push_back({e.first, e.second, tag});
  }

  auto collect = [&](BoundaryTag tag) {
    std::vector<int> nodes_on;
    for (const auto& e : boundary) {
      if (e.tag == tag) {
        nodes_on.push_back(e.a);
        nodes_on.push_back(e.b);
      }
    }
    std::sort(nodes_on.begin(), nodes_on.end());
    nodes_on.erase(std::unique(nodes_on.begin(), nodes_on.end()), nodes_on.end());
    return nodes_on;
  };
  bottom_nodes = collect(BoundaryTag::bottom);
  top_nodes = collect(BoundaryTag::top);
  const double y_lo = lo.y() + 0.25 * height() - eps;
  const double y_hi = lo.y() + 0.75 * height() + eps;
  auto strip = [&](BoundaryTag tag) {
    std::vector<int> s;
    for (int v : collect(tag)) {
      if (nodes[v].y() >= y_lo && nodes[v].y() <= y_hi) s.push_back(v);
    }
    std::sort(s.begin(), s.end(), [&](int p, int q) { return nodes[p].y() < nodes[q].y(); });
    return s;
  };
  left_strip = strip(BoundaryTag::left);
  right_strip = strip(BoundaryTag::right);
}

namespace {

struct PointIndex {
  std::map<std::pair<double, double>, int> index;
  Pslg* pslg;
  int operator()(const Vec2& p) {
    const auto key = std::make_pair(p.x(), p.y());
    const auto it = index.find(key);
    if (it != index.end()) return it->second;
    const int i = static_cast<int>(pslg->points.size());
    pslg->points.push_back(p);
    index.emplace(key, i);
    return i;
  }
};

Mesh finish_mesh(const Triangulation& tri, const Vec2& lo, const Vec2& hi) {
  Mesh m;
  m.nodes = tri.points;
  m.triangles = tri.triangles;
  m.lo = lo;
  m.hi = hi;
  if (m.triangles.empty()) throw MeshingError("mesh has no triangles");
  m.classify();
  return m;
}

Mesh mesh_region(const Vec2& lo, const Vec2& hi, const std::vector<const Pore*>& pores,
                 const MeshOptions& opt) {
  if (!(opt.target_h > 0.0)) throw std::invalid_argument("target_h must be positive");
  Pslg pslg;
  PointIndex index{{}, &pslg};
  const double W = hi.x() - lo.x(), H = hi.y() - lo.y();
  auto on_side = [&](const Vec2& p, int side) {
    switch (side) {
      case 0:
        return p.y() == lo.y();
      case 1:
        return p.x() == hi.x();
      case 2:
        return p.y() == hi.y();
      default:
        return p.x() == lo.x();
    }
  };
  auto inside_pore = [&](const Vec2& p) {
    for (const Pore* q : pores) {
      if (in_convex(q->polygon, p)) return true;
    }
    return false;
  };

  std::vector<std::vector<Vec2>> side_points(4);
  side_points[0] = {lo, Vec2(hi.x(), lo.y())};
  side_points[1] = {Vec2(hi.x(), lo.y()), hi};
  side_points[2] = {hi, Vec2(lo.x(), hi.y())};
  side_points[3] = {Vec2(lo.x(), hi.y()), lo};
  for (double f : {0.25, 0.75}) {
    const Vec2 l(lo.x(), lo.y() + f * H), r(hi.x(), lo.y() + f * H);
    if (!inside_pore(l)) side_points[3].push_back(l);
    if (!inside_pore(r)) side_points[1].push_back(r);
  }
  for (const Pore* q : pores) {
    const auto& c = q->clipped;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec2& a = c[i];
      const Vec2& b = c[(i + 1) % c.size()];
      bool along = false;
      for (int s = 0; s < 4; ++s) {
        if (on_side(a, s)) side_points[s].push_back(a);
        along = along || (on_side(a, s) && on_side(b, s));
      }
      if (!along) pslg.segments.push_back({index(a), index(b)});
    }
  }
  for (int s = 0; s < 4; ++s) {
    auto& pts = side_points[s];
    const Vec2 start = pts[0];
    std::sort(pts.begin(), pts.end(), [&](const Vec2& p, const Vec2& q) {
      return (p - start).squaredNorm() < (q - start).squaredNorm();
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      pslg.segments.push_back({index(pts[i]), index(pts[i + 1])});
    }
  }

  RefineOptions ro;
  ro.min_angle_deg = opt.min_angle_deg;
  ro.max_edge = opt.target_h;
  ro.min_edge = opt.target_h / 50.0;
  const double eps = 1e-12 * std::max(W, H);
  ro.inside = [&](const Vec2& p) {
    if (p.x() <= lo.x() + eps || p.x() >= hi.x() - eps || p.y() <= lo.y() + eps ||
        p.y() >= hi.y() - eps) {
      return false;
    }
    return !inside_pore(p);
  };
  return finish_mesh(triangulate(pslg, ro), lo, hi);
}

}  // namespace

Mesh mesh_shape(const ReferenceShape& shape, const MeshOptions& options) {
  std::vector<const Pore*> pores;
  for (const auto& p : shape.pores) pores.push_back(&p);
  return mesh_region(shape.domain.lo(), shape.domain.hi(), pores, options);
}

Mesh mesh_rectangle(const Vec2& lo, const Vec2& hi, const MeshOptions& options) {
  return mesh_region(lo, hi, {}, options);
}

Envelope domain_envelope(const WallpaperGroup& g, const Domain& d, const FlowConfig& cfg) {
  return Envelope(d.lo(), d.hi(), cfg.envelope_margin * cell_length(g));
}

Envelope mesh_envelope(const WallpaperGroup& g, const Mesh& m, const FlowConfig& cfg) {
  return Envelope(m.lo, m.hi, cfg.envelope_margin * cell_length(g));
}

DeformResult deform_mesh(const Mesh& mesh, const Mlp& net, const WallpaperGroup& g,
                         const FlowConfig& cfg, const Envelope& env) {
  DeformResult out;
  out.mesh = mesh;
  out.mesh.nodes = flow_points(net, g, mesh.nodes, cfg, env);
  double worst = std::numeric_limits<double>::infinity();
  std::size_t worst_t = 0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double ratio = out.mesh.signed_area(t) / mesh.signed_area(t);
    if (ratio < worst) {
      worst = ratio;
      worst_t = t;
    }
  }
  out.min_area_ratio = worst;
  if (worst <= 1e-3) {
    throw ElementInversionError(worst_t, worst,
                                "element " + std::to_string(worst_t) +
                                    " collapsed: area ratio " + std::to_string(worst));
  }
  out.min_angle = out.mesh.min_angle();
  return out;
}

}  // namespace cellflow
