#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cellflow/geometry.hpp"

namespace cellflow {

/// Isotropic neo-Hookean material. E in MPa.
struct Material {
  double E = 50.0;
  double nu = 0.46;

  double mu() const { return E / (2.0 * (1.0 + nu)); }
  double lambda() const { return nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu)); }
  void validate() const;
};

enum class LoadMode { tension, compression };

/// Bottom edge clamped, top edge moved vertically by strain * height in
/// equal increments, left and right edges free.
struct LoadCase {
  LoadMode mode = LoadMode::tension;
  double final_strain = 0.1;
  int n_increments = 10;

  void validate() const;
  /// Signed applied strain after increment k (k = 0 .. n_increments).
  double strain(int k) const;
  double sign() const { return mode == LoadMode::tension ? 1.0 : -1.0; }
};

double psi(const Mat2& F, const Material& mat);

struct PsiDerivatives {
  double psi = 0.0;
  Mat2 P = Mat2::Zero();                    // dPsi/dF
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();  // d2Psi/dF2, index 2*i + J
};

PsiDerivatives psi_derivatives(const Mat2& F, const Material& mat, bool with_tangent = true);

/// Energy, residual dE/du and Hessian of the P1 discretisation.
struct Assembly {
  double energy = 0.0;
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> hessian;
};

/// Assembles on a fixed reference mesh. Element geometry and the sparse
/// pattern are computed once; every call reuses them.
class Assembler {
 public:
  explicit Assembler(const Mesh& mesh);

  std::size_t num_dofs() const { return 2 * n_nodes_; }
  const Mesh& mesh() const { return *mesh_; }

  /// Total energy; throws NonPositiveJacobianError on det F <= 0.
  double energy(const Material& mat, const Eigen::VectorXd& u) const;
  Eigen::VectorXd residual(const Material& mat, const Eigen::VectorXd& u) const;
  /// Fills residual and the values of hessian (which must come from
  /// pattern()). Returns the energy.
  double assemble(const Material& mat, const Eigen::VectorXd& u, Eigen::VectorXd& residual,
                  Eigen::SparseMatrix<double>* hessian) const;

  /// Structurally complete Hessian with zero values.
  const Eigen::SparseMatrix<double>& pattern() const { return pattern_; }

  /// d(w . r(u, X))/dX for every node, X the reference coordinates.
  std::vector<Vec2> residual_vjp_coords(const Material& mat, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& w) const;

 private:
  struct Element {
    std::array<int, 3> v;
    std::array<Vec2, 3> grad;  // shape function gradients
    double area;
  };

  const Mesh* mesh_;
  std::size_t n_nodes_;
  std::vector<Element> elements_;
  Eigen::SparseMatrix<double> pattern_;
  std::vector<int> slots_;  // 36 value indices per element, row-major 6x6
};

Assembly assemble(const Mesh& mesh, const Material& mat, const Eigen::VectorXd& u);

struct NewtonOptions {
  double rel_tol = 1e-8;
  int max_iterations = 50;
  int max_backtracks = 40;
};

struct NewtonReport {
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  /// Energies after every accepted step, starting with the initial one.
  std::vector<double> energies;
};

/// Equilibrium solver on one mesh. The factorisation pattern is analysed on
/// first use and reused.
class EquilibriumSolver {
 public:
  EquilibriumSolver(const Mesh& mesh, const Material& mat, NewtonOptions options = {});

  const Assembler& assembler() const { return assembler_; }
  const Material& material() const { return mat_; }

  /// Minimises the energy over the DOFs with fixed[i] == 0, keeping the
  /// others at their value in u. Damped Newton with backtracking on the
  /// energy; an indefinite Hessian is shifted until positive definite.
  NewtonReport solve(Eigen::VectorXd& u, const std::vector<char>& fixed);

  /// Solves K_ff x_f = g_f at state u with x zero on fixed DOFs. Throws
  /// SingularHessianError when K_ff is singular.
  Eigen::VectorXd solve_adjoint(const Eigen::VectorXd& u, const std::vector<char>& fixed,
                                const Eigen::VectorXd& g);

 private:
  bool factorize(const Eigen::VectorXd& u, const std::vector<char>& fixed, double shift,
                 Eigen::VectorXd& residual, double& energy);

  Assembler assembler_;
  Material mat_;
  NewtonOptions opt_;
  Eigen::SparseMatrix<double> K_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool analysed_ = false;
};

struct IncrementRecord {
  double strain = 0.0;  // signed
  double stress = 0.0;  // nominal, MPa
  int iterations = 0;
  bool converged = false;
  Eigen::VectorXd u;
};

struct SolveResult {
  LoadCase load;
  Eigen::VectorXd u;
  std::vector<IncrementRecord> increments;  // increments 1 .. n
  double nu_ef = 0.0;

  bool converged() const;
};

/// DOFs held by the load case: both components on bottom and top nodes.
std::vector<char> load_fixed_dofs(const Mesh& mesh);

/// Runs every increment with warm starts. Throws NonConvergenceError.
SolveResult solve_static(const Mesh& mesh, const Material& mat, const LoadCase& load,
                         const NewtonOptions& options = {});
SolveResult solve_static(EquilibriumSolver& solver, const LoadCase& load);

/// Nominal stress of a converged increment (1-based; 0 gives 0).
double nominal_stress(const SolveResult& result, const Mesh& mesh, std::size_t increment);

/// -sum of vertical residuals over the bottom nodes divided by the width.
double bottom_stress(const Mesh& mesh, const Eigen::VectorXd& residual);
/// Same sum over the top nodes.
double top_stress(const Mesh& mesh, const Eigen::VectorXd& residual);

/// Arc-length trapezoid weights of the strip nodes, normalised to sum 1.
std::vector<double> strip_weights(const Mesh& mesh, BoundaryTag side);

struct StripMeans {
  double left = 0.0;
  double right = 0.0;
};

/// Mean horizontal displacement over the left and right strips.
StripMeans strip_means(const Mesh& mesh, const Eigen::VectorXd& u);

/// (mean_l u_x - mean_r u_x) / (H * strain).
double effective_poisson(const Mesh& mesh, const Eigen::VectorXd& u, double strain);
double effective_poisson(const SolveResult& result, const Mesh& mesh);

struct PlateCheck {
  /// Lateral over axial strain in the middle half of a slender solid plate.
  double lateral_ratio = 0.0;
  /// Nominal stress over (axial strain * E / (1 - nu^2)) in the same region.
  double modulus_ratio = 0.0;
  /// (S_bottom + S_top) / S_bottom.
  double reaction_balance = 0.0;
  std::size_t nodes = 0;
};

/// Uniaxial tension of a 1 x 8 solid plate meshed at size h. Strains are
/// measured on the edge strips so the clamped ends do not enter.
PlateCheck plate_check(const Material& mat, double strain, double h);

}  // namespace cellflow
