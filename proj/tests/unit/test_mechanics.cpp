#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cellflow/errors.hpp"
#include "cellflow/geometry.hpp"
#include "cellflow/mechanics.hpp"
#include "oracles.hpp"

using namespace cellflow;

namespace {

// mu = lambda = 1
Material unit_lame() { return Material{2.5, 0.25}; }

Mat2 random_F(std::mt19937_64& gen, double spread) {
  std::uniform_real_distribution<double> d(-spread, spread);
  for (;;) {
    Mat2 F = Mat2::Identity();
    F(0, 0) += d(gen);
    F(0, 1) += d(gen);
    F(1, 0) += d(gen);
    F(1, 1) += d(gen);
    if (F.determinant() > 0.05) return F;
  }
}

Mesh two_triangles() {
  Mesh m;
  m.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  m.lo = Vec2(0, 0);
  m.hi = Vec2(1, 1);
  m.classify();
  return m;
}

Eigen::VectorXd random_u(std::size_t n, double scale, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  Eigen::VectorXd u(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = d(gen);
  return u;
}

}  // namespace

TEST_CASE("energy density spot values") {
  CHECK(psi(Mat2::Identity(), unit_lame()) == doctest::Approx(0.0).epsilon(1e-15));
  const double ln2 = std::log(2.0);
  const double expected = 0.5 * (5.0 - 2.0 - 2.0 * ln2) + 0.5 * ln2 * ln2;
  Mat2 F = Mat2::Identity();
  F(0, 0) = 2.0;
  CHECK(std::abs(psi(F, unit_lame()) - expected) <= 1e-12);
  CHECK(std::abs(psi(F, unit_lame()) - 1.047080) <= 1e-6);
  Mat2 bad = Mat2::Identity();
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(psi(bad, unit_lame()), NonPositiveJacobianError);
  CHECK(Material{}.mu() == doctest::Approx(50.0 / 2.92));
}

TEST_CASE("energy density is non-negative and frame indifferent") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  const Material mat;
  double worst_rot = 0.0, worst_frame = 0.0;
  bool all_nonneg = true;
  for (int i = 0; i < 100000; ++i) {
    const Mat2 F = random_F(gen, 0.8);
    const double p = psi(F, mat);
    all_nonneg = all_nonneg && p >= 0.0;
    if (i % 100 == 0) {
      const double a = ang(gen);
      Mat2 R;
      R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      worst_rot = std::max(worst_rot, std::abs(psi(R, mat)));
      worst_frame = std::max(worst_frame, std::abs(psi(R * F, mat) - p) / std::max(1.0, p));
    }
  }
  CHECK(all_nonneg);
  CHECK(worst_rot <= 1e-12);
  CHECK(worst_frame <= 1e-10);
}

TEST_CASE("stress and tangent match finite differences") {
  std::mt19937_64 gen(5);
  const Material mat;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat2 F = random_F(gen, 0.4);
    const auto d = psi_derivatives(F, mat);
    const double h = 1e-6;
    for (int a = 0; a < 4; ++a) {
      Mat2 Fp = F, Fm = F;
      Fp(a / 2, a % 2) += h;
      Fm(a / 2, a % 2) -= h;
      const double fd = (psi(Fp, mat) - psi(Fm, mat)) / (2 * h);
      CHECK(oracle::rel_err(d.P(a / 2, a % 2), fd) <= 1e-7);
      const Mat2 dP = (psi_derivatives(Fp, mat).P - psi_derivatives(Fm, mat).P) / (2 * h);
      for (int b = 0; b < 4; ++b) {
        CHECK(std::abs(d.C(b, a) - dP(b / 2, b % 2)) <= 1e-6 * (1.0 + d.C.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("assembly on a two element patch") {
  const Mesh m = two_triangles();
  const Material mat;
  const Assembly zero = assemble(m, mat, Eigen::VectorXd::Zero(8));
  CHECK(zero.energy == 0.0);
  CHECK(zero.residual.cwiseAbs().maxCoeff() <= 1e-14);

  const Eigen::VectorXd u = random_u(8, 0.05, 9);
  const Assembly a = assemble(m, mat, u);
  const Eigen::MatrixXd K = Eigen::MatrixXd(a.hessian);
  CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
  Assembler as(m);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 8; ++i) {
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    const double fd = (as.energy(mat, up) - as.energy(mat, um)) / (2 * h);
    CHECK(std::abs(a.residual[i] - fd) <= 1e-6 * a.residual.cwiseAbs().maxCoeff());
    const Eigen::VectorXd col = (as.residual(mat, up) - as.residual(mat, um)) / (2 * h);
    CHECK((K.col(i) - col).cwiseAbs().maxCoeff() <= 1e-4 * K.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("residual and Hessian on a random mesh") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.3, 25.0});
  const Material mat;
  const auto n = 2 * m.nodes.size();
  const Eigen::VectorXd u = random_u(n, 0.01, 11);
  Assembler as(m);
  Eigen::VectorXd r;
  Eigen::SparseMatrix<double> K = as.pattern();
  as.assemble(mat, u, r, &K);
  const Eigen::MatrixXd Kd(K);
  CHECK((Kd - Kd.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const double h = 1e-6;
  double worst_r = 0.0, worst_k = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    Eigen::VectorXd up = u, um = u;
    up[i] += h;
    um[i] -= h;
    const double fd = (as.energy(mat, up) - as.energy(mat, um)) / (2 * h);
    worst_r = std::max(worst_r, std::abs(r[i] - fd));
    const Eigen::VectorXd col = (as.residual(mat, up) - as.residual(mat, um)) / (2 * h);
    worst_k = std::max(worst_k, (Kd.col(i) - col).cwiseAbs().maxCoeff());
  }
  CHECK(worst_r <= 1e-6 * r.cwiseAbs().maxCoeff());
  CHECK(worst_k <= 1e-4 * Kd.cwiseAbs().maxCoeff());
}

TEST_CASE("residual derivative with respect to coordinates") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.4, 25.0});
  const Material mat;
  const auto n = 2 * m.nodes.size();
  const Eigen::VectorXd u = random_u(n, 0.02, 13);
  const Eigen::VectorXd w = random_u(n, 1.0, 14);
  const auto g = Assembler(m).residual_vjp_coords(mat, u, w);
  const double h = 1e-6;
  double worst = 0.0, scale = 0.0;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    for (int c = 0; c < 2; ++c) {
      Mesh mp = m, mm = m;
      mp.nodes[v][c] += h;
      mm.nodes[v][c] -= h;
      const double fd =
          (w.dot(Assembler(mp).residual(mat, u)) - w.dot(Assembler(mm).residual(mat, u))) / (2 * h);
      worst = std::max(worst, std::abs(g[v][c] - fd));
      scale = std::max(scale, std::abs(fd));
    }
  }
  CHECK(worst <= 1e-6 * scale);
}

TEST_CASE("patch test reproduces a homogeneous state") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(2, 1), MeshOptions{0.25, 25.0});
  const Material mat;
  Mat2 A;
  A << 0.02, -0.01, 0.015, -0.03;
  const auto n = 2 * m.nodes.size();
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& e : m.boundary) {
    for (int v : {e.a, e.b}) fixed[2 * v] = fixed[2 * v + 1] = 1;
  }
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    if (fixed[2 * v]) u.segment<2>(2 * v) = A * m.nodes[v];
  }
  EquilibriumSolver solver(m, mat, NewtonOptions{1e-13, 50, 40});
  const auto rep = solver.solve(u, fixed);
  CHECK(rep.converged);
  double worst = 0.0;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    worst = std::max(worst, (u.segment<2>(2 * v) - A * m.nodes[v]).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("clamped bottom removes rigid modes") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.25, 25.0});
  const Material mat;
  const Assembly a = assemble(m, mat, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * m.nodes.size())));
  std::vector<Eigen::Index> keep;
  std::vector<char> bottom(m.nodes.size(), 0);
  for (int v : m.bottom_nodes) bottom[v] = 1;
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    if (!bottom[v]) {
      keep.push_back(2 * v);
      keep.push_back(2 * v + 1);
    }
  }
  const Eigen::MatrixXd K(a.hessian);
  Eigen::MatrixXd Kf(keep.size(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    for (std::size_t j = 0; j < keep.size(); ++j) Kf(i, j) = K(keep[i], keep[j]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Kf);
  CHECK(ldlt.info() == Eigen::Success);
  CHECK(ldlt.vectorD().minCoeff() > 0.0);
}

TEST_CASE("zero load gives zero response") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(1, 1), MeshOptions{0.3, 25.0});
  const auto res = solve_static(m, Material{}, LoadCase{LoadMode::tension, 0.0, 2});
  CHECK(res.u.cwiseAbs().maxCoeff() == 0.0);
  CHECK(nominal_stress(res, m, 0) == 0.0);
  CHECK(nominal_stress(res, m, 2) == 0.0);
}

TEST_CASE("effective Poisson ratio of constant strip displacements") {
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(2, 3), MeshOptions{0.3, 25.0});
  const double c = 0.01, eps = 0.1;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * m.nodes.size()));
  CHECK(effective_poisson(m, u, eps) == 0.0);
  for (int v : m.left_strip) u[2 * v] = -c;
  for (int v : m.right_strip) u[2 * v] = c;
  CHECK(effective_poisson(m, u, eps) == doctest::Approx(-2 * c / (3.0 * eps)).epsilon(1e-12));
  Mesh empty = m;
  empty.left_strip.clear();
  CHECK_THROWS_AS(effective_poisson(empty, u, eps), EmptyNodeSetError);
}

TEST_CASE("solid plate under small tension") {
  const Material mat;
  const double expected_ratio = mat.nu / (1.0 - mat.nu);
  const auto coarse = plate_check(mat, 0.01, 0.25);
  const auto fine = plate_check(mat, 0.01, 0.125);
  MESSAGE("ratio " << coarse.lateral_ratio << " -> " << fine.lateral_ratio << ", modulus "
                   << coarse.modulus_ratio << " -> " << fine.modulus_ratio);
  CHECK(std::abs(fine.lateral_ratio - expected_ratio) <= 0.02 * expected_ratio);
  CHECK(std::abs(fine.modulus_ratio - 1.0) <= 0.02);
  CHECK(std::abs(fine.lateral_ratio - coarse.lateral_ratio) <= 0.01 * expected_ratio);
  CHECK(std::abs(fine.reaction_balance) <= 1e-8);
}

TEST_CASE("porous mesh energy decreases along Newton steps") {
  const auto g = lookup_group("p4");
  const auto d = make_domain(g, 2, 2);
  PoreSpec spec = default_pores(g);
  spec.segments = 24;
  const auto shape = build_reference_shape(g, spec, d, 0.5);
  const Mesh m = mesh_shape(shape, MeshOptions{0.15, 25.0});
  const auto fixed = load_fixed_dofs(m);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * m.nodes.size()));
  for (int v : m.top_nodes) u[2 * v + 1] = 0.1 * m.height();
  for (std::size_t v = 0; v < m.nodes.size(); ++v) {
    if (!fixed[2 * v + 1]) u[2 * v + 1] = 0.1 * (m.nodes[v].y() - m.lo.y());
  }
  EquilibriumSolver solver(m, Material{});
  const auto rep = solver.solve(u, fixed);
  CHECK(rep.converged);
  for (std::size_t i = 1; i < rep.energies.size(); ++i) {
    CHECK(rep.energies[i] <= rep.energies[i - 1] * (1.0 + 1e-12));
  }
  const auto res = solve_static(m, Material{}, LoadCase{LoadMode::tension, 0.1, 5});
  const Eigen::VectorXd r = solver.assembler().residual(Material{}, res.u);
  const double sb = bottom_stress(m, r), st = top_stress(m, r);
  CHECK(sb > 0.0);
  CHECK(std::abs(sb + st) <= 1e-8 * std::abs(sb));
  const auto comp = solve_static(m, Material{}, LoadCase{LoadMode::compression, 0.05, 5});
  CHECK(nominal_stress(comp, m, 5) < 0.0);
}
