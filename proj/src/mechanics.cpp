#include "cellflow/mechanics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cellflow/errors.hpp"

namespace cellflow {

void Material::validate() const {
  if (!(E > 0.0) || !std::isfinite(E)) throw ConfigError("material: E must be positive");
  if (!(nu > 0.0 && nu < 0.5)) throw ConfigError("material: nu must lie in (0, 0.5)");
}

void LoadCase::validate() const {
  if (!(final_strain >= 0.0) || !std::isfinite(final_strain)) {
    throw ConfigError("load: final_strain must be non-negative");
  }
  if (n_increments < 1) throw ConfigError("load: n_increments must be at least 1");
}

double LoadCase::strain(int k) const { return sign() * final_strain * k / n_increments; }

double psi(const Mat2& F, const Material& mat) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw NonPositiveJacobianError(-1, "det F is not positive");
  const double lnJ = std::log(J);
  return 0.5 * mat.mu() * (F.squaredNorm() - 2.0 - 2.0 * lnJ) + 0.5 * mat.lambda() * lnJ * lnJ;
}

PsiDerivatives psi_derivatives(const Mat2& F, const Material& mat, bool with_tangent) {
  const double J = F.determinant();
  if (!(J > 0.0)) throw NonPositiveJacobianError(-1, "det F is not positive");
  const double mu = mat.mu(), lam = mat.lambda();
  const double lnJ = std::log(J);
  Mat2 G;  // F^-T
  G << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  G /= J;
  PsiDerivatives d;
  d.psi = 0.5 * mu * (F.squaredNorm() - 2.0 - 2.0 * lnJ) + 0.5 * lam * lnJ * lnJ;
  d.P = mu * (F - G) + lam * lnJ * G;
  if (with_tangent) {
    for (int i = 0; i < 2; ++i) {
      for (int J_ = 0; J_ < 2; ++J_) {
        for (int k = 0; k < 2; ++k) {
          for (int L = 0; L < 2; ++L) {
            double c = (lam * lnJ - mu) * -G(i, L) * G(k, J_) + lam * G(k, L) * G(i, J_);
            if (i == k && J_ == L) c += mu;
            d.C(2 * i + J_, 2 * k + L) = c;
          }
        }
      }
    }
  }
  return d;
}

namespace {

struct Dual {
  double v = 0.0;
  double d = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator-(Dual a) { return {-a.v, -a.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
Dual operator/(Dual a, Dual b) { return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)}; }
Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
using std::log;

// Element residual r_a,i with coordinates of scalar type T.
template <class T>
std::array<T, 6> element_residual(const std::array<std::array<T, 2>, 3>& X, const double* u,
                                  double mu, double lam) {
  const T d1x = X[1][0] - X[0][0], d1y = X[1][1] - X[0][1];
  const T d2x = X[2][0] - X[0][0], d2y = X[2][1] - X[0][1];
  const T det = d1x * d2y - d2x * d1y;
  T g[3][2];
  g[1][0] = d2y / det;
  g[1][1] = -d2x / det;
  g[2][0] = -d1y / det;
  g[2][1] = d1x / det;
  g[0][0] = -(g[1][0] + g[2][0]);
  g[0][1] = -(g[1][1] + g[2][1]);
  T F[2][2];
  for (int i = 0; i < 2; ++i) {
    for (int J = 0; J < 2; ++J) {
      T s = u[i] * g[0][J] + u[2 + i] * g[1][J] + u[4 + i] * g[2][J];
      F[i][J] = i == J ? s + T{1.0} : s;
    }
  }
  const T Jd = F[0][0] * F[1][1] - F[0][1] * F[1][0];
  const T G[2][2] = {{F[1][1] / Jd, -F[1][0] / Jd}, {-F[0][1] / Jd, F[0][0] / Jd}};
  const T lnJ = log(Jd);
  const T area = 0.5 * det;
  std::array<T, 6> r;
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < 2; ++i) {
      T s{0.0};
      for (int J = 0; J < 2; ++J) {
        const T P = mu * (F[i][J] - G[i][J]) + lam * lnJ * G[i][J];
        s = s + P * g[a][J];
      }
      r[2 * a + i] = area * s;
    }
  }
  return r;
}

Mat2 element_F(const std::array<Vec2, 3>& grad, const std::array<int, 3>& v,
               const Eigen::VectorXd& u) {
  Mat2 F = Mat2::Identity();
  for (int a = 0; a < 3; ++a) {
    F += Vec2(u[2 * v[a]], u[2 * v[a] + 1]) * grad[a].transpose();
  }
  return F;
}

}  // namespace

Assembler::Assembler(const Mesh& mesh) : mesh_(&mesh), n_nodes_(mesh.nodes.size()) {
  elements_.reserve(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2 &x0 = mesh.nodes[tri[0]], &x1 = mesh.nodes[tri[1]], &x2 = mesh.nodes[tri[2]];
    Mat2 Dm;
    Dm.col(0) = x1 - x0;
    Dm.col(1) = x2 - x0;
    const double det = Dm.determinant();
    if (!(det > 0.0)) {
      throw NonPositiveJacobianError(static_cast<std::ptrdiff_t>(t), "reference element is inverted");
    }
    const Mat2 inv = Dm.inverse();
    Element e;
    e.v = tri;
    e.grad[1] = inv.row(0).transpose();
    e.grad[2] = inv.row(1).transpose();
    e.grad[0] = -(e.grad[1] + e.grad[2]);
    e.area = 0.5 * det;
    elements_.push_back(e);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(elements_.size() * 36);
  for (const auto& e : elements_) {
    for (int p = 0; p < 6; ++p) {
      for (int q = 0; q < 6; ++q) trip.emplace_back(2 * e.v[p / 2] + p % 2, 2 * e.v[q / 2] + q % 2, 0.0);
    }
  }
  const auto n = static_cast<Eigen::Index>(num_dofs());
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  slots_.resize(elements_.size() * 36);
  const int* outer = pattern_.outerIndexPtr();
  const int* inner = pattern_.innerIndexPtr();
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    for (int p = 0; p < 6; ++p) {
      const int row = 2 * e.v[p / 2] + p % 2;
      for (int q = 0; q < 6; ++q) {
        const int col = 2 * e.v[q / 2] + q % 2;
        const int* begin = inner + outer[col];
        const int* end = inner + outer[col + 1];
        slots_[36 * k + 6 * p + q] = static_cast<int>(std::lower_bound(begin, end, row) - inner);
      }
    }
  }
}

double Assembler::energy(const Material& mat, const Eigen::VectorXd& u) const {
  double total = 0.0;
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    const Mat2 F = element_F(e.grad, e.v, u);
    if (!(F.determinant() > 0.0)) {
      throw NonPositiveJacobianError(static_cast<std::ptrdiff_t>(k), "element " + std::to_string(k) + " inverted");
    }
    total += e.area * psi(F, mat);
  }
  return total;
}

Eigen::VectorXd Assembler::residual(const Material& mat, const Eigen::VectorXd& u) const {
  Eigen::VectorXd r;
  assemble(mat, u, r, nullptr);
  return r;
}

double Assembler::assemble(const Material& mat, const Eigen::VectorXd& u, Eigen::VectorXd& r,
                           Eigen::SparseMatrix<double>* K) const {
  r.setZero(static_cast<Eigen::Index>(num_dofs()));
  double* values = nullptr;
  if (K != nullptr) {
    if (K->nonZeros() != pattern_.nonZeros() || !K->isCompressed()) *K = pattern_;
    values = K->valuePtr();
    std::fill(values, values + K->nonZeros(), 0.0);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    const auto& e = elements_[k];
    const Mat2 F = element_F(e.grad, e.v, u);
    if (!(F.determinant() > 0.0)) {
      throw NonPositiveJacobianError(static_cast<std::ptrdiff_t>(k), "element " + std::to_string(k) + " inverted");
    }
    const PsiDerivatives d = psi_derivatives(F, mat, K != nullptr);
    total += e.area * d.psi;
    for (int a = 0; a < 3; ++a) {
      const Vec2 f = e.area * d.P * e.grad[a];
      r[2 * e.v[a]] += f.x();
      r[2 * e.v[a] + 1] += f.y();
    }
    if (K == nullptr) continue;
    // B maps element DOFs to vec(F), index 2*i + J
    Eigen::Matrix<double, 4, 6> B = Eigen::Matrix<double, 4, 6>::Zero();
    for (int a = 0; a < 3; ++a) {
      for (int i = 0; i < 2; ++i) {
        B(2 * i, 2 * a + i) = e.grad[a].x();
        B(2 * i + 1, 2 * a + i) = e.grad[a].y();
      }
    }
    const Eigen::Matrix<double, 4, 6> CB = d.C * B;
    double Ke[6][6];
    for (int p = 0; p < 6; ++p) {
      for (int q = p; q < 6; ++q) Ke[p][q] = e.area * B.col(p).dot(CB.col(q));
      for (int q = 0; q < p; ++q) Ke[p][q] = Ke[q][p];
    }
    const int* slot = &slots_[36 * k];
    for (int p = 0; p < 6; ++p) {
      for (int q = 0; q < 6; ++q) values[slot[6 * p + q]] += Ke[p][q];
    }
  }
  return total;
}

std::vector<Vec2> Assembler::residual_vjp_coords(const Material& mat, const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& w) const {
  std::vector<Vec2> out(n_nodes_, Vec2::Zero());
  const double mu = mat.mu(), lam = mat.lambda();
  for (const auto& e : elements_) {
    double ue[6], we[6];
    bool any = false;
    for (int p = 0; p < 6; ++p) {
      ue[p] = u[2 * e.v[p / 2] + p % 2];
      we[p] = w[2 * e.v[p / 2] + p % 2];
      any = any || we[p] != 0.0;
    }
    if (!any) continue;
    for (int s = 0; s < 6; ++s) {
      std::array<std::array<Dual, 2>, 3> X;
      for (int a = 0; a < 3; ++a) {
        for (int c = 0; c < 2; ++c) {
          X[a][c] = {mesh_->nodes[e.v[a]][c], 2 * a + c == s ? 1.0 : 0.0};
        }
      }
      const auto r = element_residual(X, ue, mu, lam);
      double acc = 0.0;
      for (int p = 0; p < 6; ++p) acc += we[p] * r[p].d;
      out[e.v[s / 2]][s % 2] += acc;
    }
  }
  return out;
}

Assembly assemble(const Mesh& mesh, const Material& mat, const Eigen::VectorXd& u) {
  Assembler a(mesh);
  Assembly out;
  out.hessian = a.pattern();
  out.energy = a.assemble(mat, u, out.residual, &out.hessian);
  return out;
}

EquilibriumSolver::EquilibriumSolver(const Mesh& mesh, const Material& mat, NewtonOptions options)
    : assembler_(mesh), mat_(mat), opt_(options) {
  mat_.validate();
  K_ = assembler_.pattern();
}

bool EquilibriumSolver::factorize(const Eigen::VectorXd& u, const std::vector<char>& fixed,
                                  double shift, Eigen::VectorXd& residual, double& energy) {
  energy = assembler_.assemble(mat_, u, residual, &K_);
  for (Eigen::Index col = 0; col < K_.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(K_, col); it; ++it) {
      const auto row = it.row();
      if (fixed[row] || fixed[col]) {
        it.valueRef() = row == col ? 1.0 : 0.0;
      } else if (row == col) {
        it.valueRef() += shift;
      }
    }
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i]) residual[static_cast<Eigen::Index>(i)] = 0.0;
  }
  if (!analysed_) {
    ldlt_.analyzePattern(K_);
    analysed_ = true;
  }
  ldlt_.factorize(K_);
  return ldlt_.info() == Eigen::Success && ldlt_.vectorD().minCoeff() > 0.0;
}

namespace {

double free_norm(const Eigen::VectorXd& r, const std::vector<char>& fixed) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!fixed[i]) s += r[i] * r[i];
  }
  return std::sqrt(s);
}

}  // namespace

NewtonReport EquilibriumSolver::solve(Eigen::VectorXd& u, const std::vector<char>& fixed) {
  NewtonReport rep;
  Eigen::VectorXd r, trial_r;
  double E = 0.0;
  double tol = 0.0;
  for (int it = 0;; ++it) {
    bool pd = factorize(u, fixed, 0.0, r, E);
    const double norm = r.norm();
    if (it == 0) {
      tol = opt_.rel_tol * std::max(1.0, norm);
      rep.energies.push_back(E);
    }
    rep.residual_norm = norm;
    rep.iterations = it;
    if (norm <= tol) {
      rep.converged = true;
      return rep;
    }
    if (it == opt_.max_iterations) return rep;

    if (!pd) {
      double scale = 0.0;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (!fixed[i]) scale = std::max(scale, std::abs(K_.coeff(i, i)));
      }
      double shift = 1e-6 * scale;
      for (int attempt = 0; attempt < 30 && !pd; ++attempt, shift *= 10.0) {
        pd = factorize(u, fixed, shift, r, E);
      }
      if (!pd) return rep;
    }
    const Eigen::VectorXd d = -ldlt_.solve(r);
    const double slope = r.dot(d);

    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= opt_.max_backtracks; ++bt, alpha *= 0.5) {
      const Eigen::VectorXd trial = u + alpha * d;
      double Et;
      try {
        Et = assembler_.energy(mat_, trial);
      } catch (const NonPositiveJacobianError&) {
        continue;
      }
      bool ok = Et <= E + 1e-4 * alpha * slope;
      if (!ok && Et <= E + 1e-12 * std::abs(E)) {
        // round-off regime: accept when the gradient still shrinks
        trial_r = assembler_.residual(mat_, trial);
        ok = free_norm(trial_r, fixed) < norm;
      }
      if (ok) {
        u = trial;
        E = std::min(Et, E);
        rep.energies.push_back(Et);
        accepted = true;
        break;
      }
    }
    if (!accepted) return rep;
  }
}

Eigen::VectorXd EquilibriumSolver::solve_adjoint(const Eigen::VectorXd& u,
                                                 const std::vector<char>& fixed,
                                                 const Eigen::VectorXd& g) {
  Eigen::VectorXd r;
  double E;
  factorize(u, fixed, 0.0, r, E);
  if (ldlt_.info() != Eigen::Success) throw SingularHessianError("adjoint factorisation failed");
  const Eigen::VectorXd D = ldlt_.vectorD();
  if (!(D.cwiseAbs().minCoeff() > 1e-13 * D.cwiseAbs().maxCoeff())) {
    throw SingularHessianError("Hessian is numerically singular");
  }
  Eigen::VectorXd rhs = g;
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i]) rhs[static_cast<Eigen::Index>(i)] = 0.0;
  }
  Eigen::VectorXd x = ldlt_.solve(rhs);
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (fixed[i]) x[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return x;
}

bool SolveResult::converged() const {
  return std::all_of(increments.begin(), increments.end(),
                     [](const IncrementRecord& r) { return r.converged; });
}

std::vector<char> load_fixed_dofs(const Mesh& mesh) {
  std::vector<char> fixed(2 * mesh.nodes.size(), 0);
  for (const auto* set : {&mesh.bottom_nodes, &mesh.top_nodes}) {
    for (int v : *set) fixed[2 * v] = fixed[2 * v + 1] = 1;
  }
  return fixed;
}

SolveResult solve_static(const Mesh& mesh, const Material& mat, const LoadCase& load,
                         const NewtonOptions& options) {
  EquilibriumSolver solver(mesh, mat, options);
  return solve_static(solver, load);
}

SolveResult solve_static(EquilibriumSolver& solver, const LoadCase& load) {
  load.validate();
  const Mesh& mesh = solver.assembler().mesh();
  if (mesh.bottom_nodes.empty() || mesh.top_nodes.empty()) {
    throw EmptyNodeSetError("load case needs nodes on the bottom and top edges");
  }
  const auto fixed = load_fixed_dofs(mesh);
  const double H = mesh.height();
  const double y0 = mesh.lo.y();
  const auto n = static_cast<Eigen::Index>(2 * mesh.nodes.size());

  SolveResult res;
  res.load = load;
  res.u = Eigen::VectorXd::Zero(n);
  for (int k = 1; k <= load.n_increments; ++k) {
    const double eps = load.strain(k), step = eps - load.strain(k - 1);
    Eigen::VectorXd plain = res.u;
    for (int v : mesh.top_nodes) {
      plain[2 * v] = 0.0;
      plain[2 * v + 1] = eps * H;
    }
    // affine predictor, then the bare warm start if it inverts an element
    Eigen::VectorXd trial = plain;
    for (std::size_t v = 0; v < mesh.nodes.size(); ++v) {
      if (!fixed[2 * v + 1]) trial[2 * v + 1] += step * (mesh.nodes[v].y() - y0);
    }
    if (k == 1 && load.mode == LoadMode::compression) {
      for (std::size_t v = 0; v < mesh.nodes.size(); ++v) {
        if (fixed[2 * v]) continue;
        const double s = std::sin(std::numbers::pi * (mesh.nodes[v].y() - y0) / H);
        trial[2 * v] += 1e-6 * H * s;
        plain[2 * v] += 1e-6 * H * s;
      }
    }
    bool feasible = true;
    try {
      solver.assembler().energy(solver.material(), trial);
    } catch (const NonPositiveJacobianError&) {
      feasible = false;
    }
    if (!feasible) {
      trial = plain;
      try {
        solver.assembler().energy(solver.material(), trial);
      } catch (const NonPositiveJacobianError&) {
        throw NonConvergenceError(k - 1, "increment " + std::to_string(k) + " inverts an element at the warm start");
      }
    }
    const NewtonReport rep = solver.solve(trial, fixed);
    if (!rep.converged) {
      throw NonConvergenceError(k - 1, "Newton did not converge at increment " + std::to_string(k) +
                                           " (residual " + std::to_string(rep.residual_norm) + ")");
    }
    res.u = trial;
    IncrementRecord rec;
    rec.strain = eps;
    rec.stress = bottom_stress(mesh, solver.assembler().residual(solver.material(), res.u));
    rec.iterations = rep.iterations;
    rec.converged = true;
    rec.u = res.u;
    res.increments.push_back(std::move(rec));
  }
  res.nu_ef = load.final_strain > 0.0
                  ? effective_poisson(mesh, res.u, load.strain(load.n_increments))
                  : 0.0;
  return res;
}

double nominal_stress(const SolveResult& result, const Mesh&, std::size_t increment) {
  if (increment == 0) return 0.0;
  if (increment > result.increments.size()) throw UnconvergedIncrementError("increment out of range");
  const auto& rec = result.increments[increment - 1];
  if (!rec.converged) throw UnconvergedIncrementError("increment did not converge");
  return rec.stress;
}

double bottom_stress(const Mesh& mesh, const Eigen::VectorXd& residual) {
  double s = 0.0;
  for (int v : mesh.bottom_nodes) s += residual[2 * v + 1];
  return -s / mesh.width();
}

double top_stress(const Mesh& mesh, const Eigen::VectorXd& residual) {
  double s = 0.0;
  for (int v : mesh.top_nodes) s += residual[2 * v + 1];
  return -s / mesh.width();
}

std::vector<double> strip_weights(const Mesh& mesh, BoundaryTag side) {
  const auto& strip = side == BoundaryTag::left ? mesh.left_strip : mesh.right_strip;
  std::vector<double> w(strip.size(), 0.0);
  std::vector<int> pos(mesh.nodes.size(), -1);
  for (std::size_t i = 0; i < strip.size(); ++i) pos[strip[i]] = static_cast<int>(i);
  double total = 0.0;
  for (const auto& e : mesh.boundary) {
    if (e.tag != side || pos[e.a] < 0 || pos[e.b] < 0) continue;
    const double len = (mesh.nodes[e.a] - mesh.nodes[e.b]).norm();
    w[pos[e.a]] += 0.5 * len;
    w[pos[e.b]] += 0.5 * len;
    total += len;
  }
  if (!(total > 0.0)) throw EmptyNodeSetError(std::string("strip on the ") + std::string(to_string(side)) + " edge is empty");
  for (double& x : w) x /= total;
  return w;
}

StripMeans strip_means(const Mesh& mesh, const Eigen::VectorXd& u) {
  StripMeans m;
  const auto wl = strip_weights(mesh, BoundaryTag::left);
  const auto wr = strip_weights(mesh, BoundaryTag::right);
  for (std::size_t i = 0; i < wl.size(); ++i) m.left += wl[i] * u[2 * mesh.left_strip[i]];
  for (std::size_t i = 0; i < wr.size(); ++i) m.right += wr[i] * u[2 * mesh.right_strip[i]];
  return m;
}

double effective_poisson(const Mesh& mesh, const Eigen::VectorXd& u, double strain) {
  const StripMeans m = strip_means(mesh, u);
  return (m.left - m.right) / (mesh.height() * strain);
}

double effective_poisson(const SolveResult& result, const Mesh& mesh) {
  if (result.increments.empty() || !result.increments.back().converged) {
    throw UnconvergedIncrementError("final increment did not converge");
  }
  return effective_poisson(mesh, result.u, result.increments.back().strain);
}

PlateCheck plate_check(const Material& mat, double strain, double h) {
  const double W = 1.0, H = 8.0;
  const Mesh m = mesh_rectangle(Vec2(0, 0), Vec2(W, H), MeshOptions{h, 25.0});
  const auto res = solve_static(m, mat, LoadCase{LoadMode::tension, strain, 1});
  // axial strain from a weighted least-squares slope of u_y along both strips
  double sw = 0.0, sy = 0.0, su = 0.0, syy = 0.0, syu = 0.0;
  for (auto side : {BoundaryTag::left, BoundaryTag::right}) {
    const auto& strip = side == BoundaryTag::left ? m.left_strip : m.right_strip;
    const auto w = strip_weights(m, side);
    for (std::size_t i = 0; i < strip.size(); ++i) {
      const double y = m.nodes[strip[i]].y(), uy = res.u[2 * strip[i] + 1];
      sw += w[i];
      sy += w[i] * y;
      su += w[i] * uy;
      syy += w[i] * y * y;
      syu += w[i] * y * uy;
    }
  }
  const double axial = (syu - sy * su / sw) / (syy - sy * sy / sw);
  const StripMeans means = strip_means(m, res.u);
  const double lateral = (means.right - means.left) / W;
  const Eigen::VectorXd r = Assembler(m).residual(mat, res.u);
  PlateCheck out;
  out.lateral_ratio = -lateral / axial;
  const double S = bottom_stress(m, r);
  out.modulus_ratio = S / (axial * mat.E / (1.0 - mat.nu * mat.nu));
  out.reaction_balance = (S + top_stress(m, r)) / S;
  out.nodes = m.nodes.size();
  return out;
}

}  // namespace cellflow
