#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <map>
#include <set>

#include "cellflow/errors.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/triangulation.hpp"
#include "oracles.hpp"

using namespace cellflow;

namespace {

// Monte Carlo free area check for the disc/rectangle formula.
double mc_disc_rect(const Vec2& c, double r, const Vec2& lo, const Vec2& hi) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
  const int n = 400000;
  int hit = 0;
  for (int i = 0; i < n; ++i) hit += (Vec2(ux(gen), uy(gen)) - c).norm() <= r ? 1 : 0;
  return (hi - lo).prod() * hit / n;
}

}  // namespace

TEST_CASE("disc and rectangle overlap area") {
  const Vec2 lo(0, 0), hi(1, 1);
  CHECK(disc_rect_area(Vec2(0.5, 0.5), 0.3, lo, hi) ==
        doctest::Approx(std::numbers::pi * 0.09).epsilon(1e-13));
  CHECK(disc_rect_area(Vec2(0.0, 0.0), 0.3, lo, hi) ==
        doctest::Approx(std::numbers::pi * 0.09 / 4).epsilon(1e-13));
  CHECK(disc_rect_area(Vec2(0.5, 0.0), 0.3, lo, hi) ==
        doctest::Approx(std::numbers::pi * 0.09 / 2).epsilon(1e-13));
  CHECK(disc_rect_area(Vec2(5, 5), 0.3, lo, hi) == 0.0);
  CHECK(disc_rect_area(Vec2(0.5, 0.5), 2.0, lo, hi) == doctest::Approx(1.0).epsilon(1e-13));
  for (const Vec2 c : {Vec2(0.1, 0.8), Vec2(-0.1, 0.35), Vec2(0.95, 1.1)}) {
    const double exact = disc_rect_area(c, 0.4, lo, hi);
    CHECK(std::abs(exact - mc_disc_rect(c, 0.4, lo, hi)) < 3e-3);
  }
}

TEST_CASE("p1 centred pore at half fraction") {
  const auto g = lookup_group("p1");
  const auto d = make_domain(g, 1, 1);
  PoreSpec spec{{Vec2(0.5, 0.5)}, 64};
  const auto shape = build_reference_shape(g, spec, d, 0.5);
  CHECK(shape.radius == doctest::Approx(std::sqrt(0.5 / std::numbers::pi)).epsilon(1e-12));
  CHECK(std::abs(shape.radius - 0.3989) < 1e-4);
  CHECK(shape.pores.size() == 1);
  CHECK(std::abs(shape.polygon_fraction - 0.5) < 1e-12);
}

TEST_CASE("p4 orbit has four rotated images per cell") {
  const auto g = lookup_group("p4");
  const auto d = make_domain(g, 1, 1);
  const auto shape = build_reference_shape(g, default_pores(g), d, 0.5);
  REQUIRE(shape.pores.size() == 4);
  // rotating any pore centre by 90 degrees about the cell centre gives another
  const Vec2 mid(0.5, 0.5);
  for (const auto& p : shape.pores) {
    const Vec2 q = mid + oracle::rot(90) * (p.center - mid);
    int hits = 0;
    for (const auto& o : shape.pores) hits += (o.center - q).norm() < 1e-9 ? 1 : 0;
    CHECK(hits == 1);
  }
  std::vector<double> dists;
  for (std::size_t i = 0; i < 4; ++i) dists.push_back((shape.pores[i].center - mid).norm());
  for (double x : dists) CHECK(x == doctest::Approx(dists[0]).epsilon(1e-12));
}

TEST_CASE("default shapes exist for every group and are symmetric") {
  for (auto name : group_names()) {
    CAPTURE(name);
    const auto g = lookup_group(name);
    const auto d = make_domain(g, 3, 3);
    const auto shape = build_reference_shape(g, default_pores(g), d, 0.5);
    CHECK(std::abs(shape.achieved_fraction - 0.5) <= 0.005);
    CHECK(std::abs(shape.polygon_fraction - 0.5) <= 0.005);
    // lattice-reduced images of every pore centre are pore centres
    for (const auto& p : shape.pores) {
      const Vec2 u = g.lattice_inverse() * p.center;
      for (std::size_t r = 0; r < g.order(); ++r) {
        const Vec2 img = g.frac_linear(r).cast<double>() * u + g.coset_reps()[r].b_frac;
        bool found = false;
        for (const auto& o : shape.pores) {
          const Vec2 diff = g.lattice_inverse() * o.center - img;
          found = found || (diff - diff.array().round().matrix()).cwiseAbs().maxCoeff() < 1e-9;
        }
        CHECK(found);
      }
    }
  }
}

TEST_CASE("infeasible fractions") {
  const auto g = lookup_group("p4");
  const auto d = make_domain(g, 3, 3);
  CHECK_THROWS_AS(build_reference_shape(g, default_pores(g), d, 0.999), InfeasibleFractionError);
  CHECK_THROWS_AS(build_reference_shape(g, default_pores(g), d, 0.05), InfeasibleFractionError);
}

TEST_CASE("polygon clipping") {
  const std::vector<Vec2> sq = {Vec2(-1, -1), Vec2(1, -1), Vec2(1, 1), Vec2(-1, 1)};
  const auto c = clip_to_rect(sq, Vec2(0, 0), Vec2(3, 3));
  CHECK(polygon_area(c) == doctest::Approx(1.0));
  CHECK(clip_to_rect(sq, Vec2(5, 5), Vec2(6, 6)).empty());
}

TEST_CASE("rectangle mesh without pores") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(2, 1), MeshOptions{0.5, 25.0});
  CHECK(std::abs(m.area() - 2.0) <= 1e-9);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) CHECK(m.signed_area(t) > 0);
  CHECK(m.min_angle() >= 25.0 - 1e-9);
  // every boundary edge has one tag and the tags cover the perimeter
  double perim[5] = {0, 0, 0, 0, 0};
  for (const auto& e : m.boundary) {
    perim[static_cast<int>(e.tag)] += (m.nodes[e.a] - m.nodes[e.b]).norm();
  }
  CHECK(perim[0] == doctest::Approx(2.0));
  CHECK(perim[1] == doctest::Approx(2.0));
  CHECK(perim[2] == doctest::Approx(1.0));
  CHECK(perim[3] == doctest::Approx(1.0));
  CHECK(perim[4] == 0.0);
  // strips span exactly [H/4, 3H/4]
  REQUIRE(!m.left_strip.empty());
  CHECK(m.nodes[m.left_strip.front()].y() == doctest::Approx(0.25));
  CHECK(m.nodes[m.left_strip.back()].y() == doctest::Approx(0.75));
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    const Vec2& p = m.nodes[i];
    if (p.x() == 0.0 && p.y() >= 0.25 && p.y() <= 0.75) {
      CHECK(std::count(m.left_strip.begin(), m.left_strip.end(), static_cast<int>(i)) == 1);
    }
  }
  // no orphan nodes
  std::vector<int> used(m.nodes.size(), 0);
  for (const auto& t : m.triangles) {
    for (int v : t) used[v] = 1;
  }
  CHECK(std::count(used.begin(), used.end(), 0) == 0);
}

TEST_CASE("porous mesh area and conformity") {
  const auto g = lookup_group("p1");
  const auto d = make_domain(g, 1, 1);
  const auto shape = build_reference_shape(g, PoreSpec{{Vec2(0.5, 0.5)}, 64}, d, 0.5);
  const Mesh m = mesh_shape(shape, MeshOptions{0.1, 25.0});
  const double circle = 1.0 - std::numbers::pi * shape.radius * shape.radius;
  CHECK(std::abs(m.area() - circle) <= 0.002 * circle);
  CHECK(std::abs(m.area() - shape.solid_area()) <= 1e-10);
  // each interior edge is shared by exactly two triangles
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : m.triangles) {
    for (int i = 0; i < 3; ++i) {
      const int a = t[i], b = t[(i + 1) % 3];
      ++count[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [e, c] : count) CHECK(c <= 2);
  std::size_t pore_edges = 0;
  for (const auto& e : m.boundary) pore_edges += e.tag == BoundaryTag::pore ? 1 : 0;
  CHECK(pore_edges >= 64);
}

TEST_CASE("default desk meshes for every group") {
  for (auto name : group_names()) {
    CAPTURE(name);
    const auto g = lookup_group(name);
    const auto d = make_domain(g, 3, 3);
    PoreSpec spec = default_pores(g);
    spec.segments = 24;
    const auto shape = build_reference_shape(g, spec, d, 0.5);
    const Mesh m = mesh_shape(shape, MeshOptions{0.15, 25.0});
    CHECK(std::abs(m.area() - shape.solid_area()) <= 1e-9 * m.area());
    CHECK(!m.left_strip.empty());
    CHECK(!m.right_strip.empty());
    CHECK(!m.bottom_nodes.empty());
    CHECK(!m.top_nodes.empty());
    CHECK(m.min_angle() > 10.0);
    MESSAGE(name << ": " << m.nodes.size() << " nodes, min angle " << m.min_angle());
  }
}

TEST_CASE("deformation keeps area and detects inversion") {
  const auto g = lookup_group("p4");
  const auto d = make_domain(g, 3, 3);
  PoreSpec spec = default_pores(g);
  spec.segments = 24;
  const auto shape = build_reference_shape(g, spec, d, 0.5);
  const Mesh m = mesh_shape(shape, MeshOptions{0.15, 25.0});
  FlowConfig cfg;
  const Envelope env = domain_envelope(g, d, cfg);

  const auto same = deform_mesh(m, Mlp{}, g, cfg, env);
  CHECK(same.mesh.nodes == m.nodes);
  CHECK(same.min_area_ratio == doctest::Approx(1.0));

  const Mlp small = Mlp::random({}, 21, 0.2);
  const auto moved = deform_mesh(m, small, g, cfg, env);
  CHECK(std::abs(moved.mesh.area() - m.area()) <= 0.005 * m.area());
  // boundary nodes stay on the box
  for (int v : m.bottom_nodes) CHECK(moved.mesh.nodes[v] == m.nodes[v]);

  Mlp big = Mlp::random({}, 21, 0.2);
  for (double& p : big.params()) p *= 100.0;
  CHECK_THROWS_AS(deform_mesh(m, big, g, cfg, env), ElementInversionError);
}

TEST_CASE("soft minimum angle bounds the minimum and has the right gradient") {
  Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.3, 25.0});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  for (auto& x : m.nodes) x += Vec2(jitter(rng), jitter(rng));
  std::vector<Vec2> grad;
  const double tau = 0.5;
  const double s = soft_min_angle(m, tau, &grad);
  CHECK(s <= m.min_angle());
  CHECK(s >= m.min_angle() - tau * std::log(3.0 * static_cast<double>(m.triangles.size())));
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < m.nodes.size(); ++i) {
    for (int k = 0; k < 2; ++k) {
      Mesh a = m, b = m;
      a.nodes[i][k] += h;
      b.nodes[i][k] -= h;
      const double fd = (soft_min_angle(a, tau) - soft_min_angle(b, tau)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - grad[i][k]));
    }
  }
  CHECK(worst < 1e-5);
}
