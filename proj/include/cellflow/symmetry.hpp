#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cellflow {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// One plane isometry x -> A x + B b_frac, where B is the owning group's
/// lattice matrix.
struct Isometry {
  Mat2 A = Mat2::Identity();
  Vec2 b_frac = Vec2::Zero();
};

enum class LatticeKind { square, centered, hexagonal };

std::string_view to_string(LatticeKind kind);

/// A wallpaper group stored as lattice basis plus coset representatives with
/// fractional translations in [0,1)^2.
class WallpaperGroup {
 public:
  struct Entry;

  const std::string& name() const noexcept { return name_; }
  LatticeKind lattice_kind() const noexcept { return kind_; }

  /// Columns are the lattice basis vectors b1, b2.
  const Mat2& lattice() const noexcept { return lattice_; }
  const Mat2& lattice_inverse() const noexcept { return lattice_inv_; }

  std::span<const Isometry> coset_reps() const noexcept { return reps_; }
  std::size_t order() const noexcept { return reps_.size(); }

  /// Linear part of rep i in lattice coordinates (integer matrix B^-1 A B).
  const Eigen::Matrix2i& frac_linear(std::size_t i) const { return frac_linear_.at(i); }

  /// Fundamental polygon vertices in fractional lattice coordinates.
  const std::vector<Vec2>& fundamental_polygon() const noexcept { return fundamental_; }

  /// Size of the conventional rectangular cell. Both edge vectors of the
  /// rectangle are lattice translations, so a W x H block of cells is an
  /// integer tiling.
  Vec2 cell_size() const noexcept { return cell_; }

  /// Returns a copy with every length multiplied by `scale`.
  WallpaperGroup scaled(double scale) const;

 private:
  friend WallpaperGroup lookup_group(std::string_view, double);

  std::string name_;
  LatticeKind kind_ = LatticeKind::square;
  Mat2 lattice_ = Mat2::Identity();
  Mat2 lattice_inv_ = Mat2::Identity();
  std::vector<Isometry> reps_;
  std::vector<Eigen::Matrix2i> frac_linear_;
  std::vector<Vec2> fundamental_;
  Vec2 cell_ = Vec2::Ones();
};

/// Canonical names of the 17 plane groups in IUCr order.
std::span<const std::string_view> group_names();

/// Resolves a full or short Hermann-Mauguin symbol (e.g. "p6mm" or "p6m").
/// Throws UnknownGroupError for anything else.
WallpaperGroup lookup_group(std::string_view name, double scale = 1.0);

Vec2 apply_isometry(const WallpaperGroup& g, const Isometry& phi, const Vec2& x);

struct ComposeResult {
  std::size_t index = 0;           ///< position of the reduced rep in coset_reps()
  Isometry rep;                    ///< the reduced rep itself
  Eigen::Vector2i shift = Eigen::Vector2i::Zero();  ///< integer lattice remainder
};

/// Composes phi after psi and splits the fractional translation into the
/// part in [0,1)^2 and an integer lattice shift.
ComposeResult compose_mod_lattice(const WallpaperGroup& g, const Isometry& phi,
                                  const Isometry& psi);

/// Torus embedding (cos 2 pi u1, sin 2 pi u1, cos 2 pi u2, sin 2 pi u2) of the
/// fractional coordinates u = B^-1 x.
Eigen::Vector4d rho(const WallpaperGroup& g, const Vec2& x);

/// Jacobian d rho / d x (4 x 2).
Eigen::Matrix<double, 4, 2> rho_jacobian(const WallpaperGroup& g, const Vec2& x);

/// n-dimensional torus embedding for an arbitrary lattice, returns 2n values.
Eigen::VectorXd rho_nd(const Eigen::MatrixXd& lattice_inverse, const Eigen::VectorXd& x);

/// Group average (1/|G|) sum_phi A_phi^T f(phi x). The result is
/// semi-invariant whenever f is invariant under lattice translations.
Vec2 gamma_symmetrize(const WallpaperGroup& g, const std::function<Vec2(const Vec2&)>& f,
                      const Vec2& x);

}  // namespace cellflow
