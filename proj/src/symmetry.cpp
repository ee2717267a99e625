#include "cellflow/symmetry.hpp"

#include <array>
#include <cmath>
#include <initializer_list>
#include <numbers>

#include "cellflow/errors.hpp"

namespace cellflow {

namespace {

struct OpRow {
  std::array<int, 4> m;  // row-major integer matrix in lattice coordinates
  std::array<double, 2> t;
};

struct GroupRow {
  std::string_view name;
  std::initializer_list<std::string_view> aliases;
  LatticeKind kind;
  std::initializer_list<OpRow> ops;
  // fundamental polygon in cartesian coordinates of the unit lattice
  std::initializer_list<std::array<double, 2>> polygon;
};

constexpr double kS3 = 1.7320508075688772;  // sqrt(3)
constexpr double kP = kS3 / 6.0;            // height of the triangle centroid

// Plane group generator tables expanded to full coset representative lists.
// Square and rectangular groups live on the unit square; centered groups on
// the primitive rhombic basis b1 = (1/2,-1/2), b2 = (1/2,1/2); hexagonal
// groups on b1 = (1,0), b2 = (1/2, sqrt(3)/2).
const std::array<GroupRow, 17>& table() {
  static const std::array<GroupRow, 17> rows = {{
      {"p1", {}, LatticeKind::square, {{{1, 0, 0, 1}, {0, 0}}}, {{0, 0}, {1, 0}, {1, 1}, {0, 1}}},
      {"p2", {"p211"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}}, {{-1, 0, 0, -1}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}}},
      {"pm", {"p1m1"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}}, {{1, 0, 0, -1}, {0, 0}}},
       {{0, 0}, {1, 0}, {1, 0.5}, {0, 0.5}}},
      {"pg", {"p1g1"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}}, {{1, 0, 0, -1}, {0.5, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 1}, {0, 1}}},
      {"cm", {"c1m1"}, LatticeKind::centered,
       {{{1, 0, 0, 1}, {0, 0}}, {{0, 1, 1, 0}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}},
      {"p2mm", {"pmm"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{-1, 0, 0, 1}, {0, 0}},
        {{1, 0, 0, -1}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}},
      {"p2mg", {"pmg"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{-1, 0, 0, 1}, {0.5, 0}},
        {{1, 0, 0, -1}, {0.5, 0}}},
       {{0, 0}, {0.25, 0}, {0.25, 1}, {0, 1}}},
      {"p2gg", {"pgg"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{-1, 0, 0, 1}, {0.5, 0.5}},
        {{1, 0, 0, -1}, {0.5, 0.5}}},
       {{0, 0}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}},
      {"c2mm", {"cmm"}, LatticeKind::centered,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, -1, -1, 0}, {0, 0}},
        {{0, 1, 1, 0}, {0, 0}}},
       {{0, 0}, {0.25, 0}, {0.25, 0.5}, {0, 0.5}}},
      {"p4", {}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{0, -1, 1, 0}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, 1, -1, 0}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 0.5}, {0, 0.5}}},
      {"p4mm", {"p4m"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{0, -1, 1, 0}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, 1, -1, 0}, {0, 0}},
        {{-1, 0, 0, 1}, {0, 0}},
        {{0, -1, -1, 0}, {0, 0}},
        {{1, 0, 0, -1}, {0, 0}},
        {{0, 1, 1, 0}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, 0.5}}},
      {"p4gm", {"p4g"}, LatticeKind::square,
       {{{1, 0, 0, 1}, {0, 0}},
        {{0, -1, 1, 0}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, 1, -1, 0}, {0, 0}},
        {{-1, 0, 0, 1}, {0.5, 0.5}},
        {{0, -1, -1, 0}, {0.5, 0.5}},
        {{1, 0, 0, -1}, {0.5, 0.5}},
        {{0, 1, 1, 0}, {0.5, 0.5}}},
       {{0, 0}, {0.5, 0}, {0, 0.5}}},
      {"p3", {}, LatticeKind::hexagonal,
       {{{1, 0, 0, 1}, {0, 0}}, {{-1, -1, 1, 0}, {0, 0}}, {{0, 1, -1, -1}, {0, 0}}},
       {{0, 0}, {0.5, -kP}, {1, 0}, {0.5, kP}}},
      {"p3m1", {}, LatticeKind::hexagonal,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, -1, 1, 0}, {0, 0}},
        {{0, 1, -1, -1}, {0, 0}},
        {{-1, -1, 0, 1}, {0, 0}},
        {{1, 0, -1, -1}, {0, 0}},
        {{0, 1, 1, 0}, {0, 0}}},
       {{0, 0}, {0.5, -kP}, {0.5, kP}}},
      {"p31m", {}, LatticeKind::hexagonal,
       {{{1, 0, 0, 1}, {0, 0}},
        {{-1, -1, 1, 0}, {0, 0}},
        {{0, 1, -1, -1}, {0, 0}},
        {{1, 1, 0, -1}, {0, 0}},
        {{-1, 0, 1, 1}, {0, 0}},
        {{0, -1, -1, 0}, {0, 0}}},
       {{0, 0}, {1, 0}, {0.5, kP}}},
      {"p6", {}, LatticeKind::hexagonal,
       {{{1, 0, 0, 1}, {0, 0}},
        {{0, -1, 1, 1}, {0, 0}},
        {{-1, -1, 1, 0}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, 1, -1, -1}, {0, 0}},
        {{1, 1, -1, 0}, {0, 0}}},
       {{0, 0}, {1, 0}, {0.5, kP}}},
      {"p6mm", {"p6m"}, LatticeKind::hexagonal,
       {{{1, 0, 0, 1}, {0, 0}},
        {{0, -1, 1, 1}, {0, 0}},
        {{-1, -1, 1, 0}, {0, 0}},
        {{-1, 0, 0, -1}, {0, 0}},
        {{0, 1, -1, -1}, {0, 0}},
        {{1, 1, -1, 0}, {0, 0}},
        {{1, 1, 0, -1}, {0, 0}},
        {{0, 1, 1, 0}, {0, 0}},
        {{-1, 0, 1, 1}, {0, 0}},
        {{-1, -1, 0, 1}, {0, 0}},
        {{0, -1, -1, 0}, {0, 0}},
        {{1, 0, -1, -1}, {0, 0}}},
       {{0, 0}, {0.5, 0}, {0.5, kP}}},
  }};
  return rows;
}

const std::array<std::string_view, 17> kNames = {
    "p1",   "p2", "pm", "pg",   "cm",   "p2mm", "p2mg", "p2gg", "c2mm",
    "p4",   "p4mm", "p4gm", "p3", "p3m1", "p31m", "p6", "p6mm"};

Mat2 unit_lattice(LatticeKind kind) {
  Mat2 b;
  switch (kind) {
    case LatticeKind::square:
      b = Mat2::Identity();
      break;
    case LatticeKind::centered:
      b << 0.5, 0.5, -0.5, 0.5;
      break;
    case LatticeKind::hexagonal:
      b << 1.0, 0.5, 0.0, kS3 / 2.0;
      break;
  }
  return b;
}

Vec2 unit_cell(LatticeKind kind) {
  return kind == LatticeKind::hexagonal ? Vec2(1.0, kS3) : Vec2(1.0, 1.0);
}

double wrap_unit(double c) {
  // Values within 1e-9 of an integer snap to it so that exact table
  // translations (multiples of 1/2) stay exact after composition.
  double f = c - std::floor(c);
  if (f > 1.0 - 1e-9 || f < 1e-9) f = 0.0;
  return f;
}

}  // namespace

std::string_view to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::square:
      return "square";
    case LatticeKind::centered:
      return "centered";
    case LatticeKind::hexagonal:
      return "hexagonal";
  }
  return "?";
}

std::span<const std::string_view> group_names() { return kNames; }

WallpaperGroup lookup_group(std::string_view name, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("lattice scale must be positive");
  }
  for (const auto& row : table()) {
    bool match = row.name == name;
    for (auto alias : row.aliases) match = match || alias == name;
    if (!match) continue;

    WallpaperGroup g;
    g.name_ = std::string(row.name);
    g.kind_ = row.kind;
    g.lattice_ = unit_lattice(row.kind);
    g.lattice_inv_ = g.lattice_.inverse();
    for (const auto& op : row.ops) {
      Eigen::Matrix2i m;
      m << op.m[0], op.m[1], op.m[2], op.m[3];
      Isometry iso;
      iso.A = g.lattice_ * m.cast<double>() * g.lattice_inv_;
      iso.b_frac = Vec2(op.t[0], op.t[1]);
      g.reps_.push_back(iso);
      g.frac_linear_.push_back(m);
    }
    for (const auto& v : row.polygon) {
      g.fundamental_.push_back(g.lattice_inv_ * Vec2(v[0], v[1]));
    }
    g.cell_ = unit_cell(row.kind);
    return scale == 1.0 ? g : g.scaled(scale);
  }
  std::string valid;
  for (auto n : kNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw UnknownGroupError("unknown wallpaper group '" + std::string(name) +
                          "'; valid symbols: " + valid);
}

WallpaperGroup WallpaperGroup::scaled(double scale) const {
  WallpaperGroup g = *this;
  g.lattice_ *= scale;
  g.lattice_inv_ = g.lattice_.inverse();
  g.cell_ *= scale;
  // A and fractional data are scale invariant.
  return g;
}

Vec2 apply_isometry(const WallpaperGroup& g, const Isometry& phi, const Vec2& x) {
  return phi.A * x + g.lattice() * phi.b_frac;
}

ComposeResult compose_mod_lattice(const WallpaperGroup& g, const Isometry& phi,
                                  const Isometry& psi) {
  const Mat2 a = phi.A * psi.A;
  const Mat2 m_phi = g.lattice_inverse() * phi.A * g.lattice();
  const Vec2 c = m_phi * psi.b_frac + phi.b_frac;

  ComposeResult out;
  Vec2 c_hat;
  for (int i = 0; i < 2; ++i) {
    c_hat[i] = wrap_unit(c[i]);
    out.shift[i] = static_cast<int>(std::lround(c[i] - c_hat[i]));
  }
  const auto reps = g.coset_reps();
  for (std::size_t k = 0; k < reps.size(); ++k) {
    if ((reps[k].A - a).cwiseAbs().maxCoeff() < 1e-9 &&
        (reps[k].b_frac - c_hat).cwiseAbs().maxCoeff() < 1e-9) {
      out.index = k;
      out.rep = reps[k];
      return out;
    }
  }
  throw Error("composition left the coset table of group " + g.name());
}

Eigen::Vector4d rho(const WallpaperGroup& g, const Vec2& x) {
  const Vec2 u = g.lattice_inverse() * x;
  const double two_pi = 2.0 * std::numbers::pi;
  return {std::cos(two_pi * u[0]), std::sin(two_pi * u[0]), std::cos(two_pi * u[1]),
          std::sin(two_pi * u[1])};
}

Eigen::Matrix<double, 4, 2> rho_jacobian(const WallpaperGroup& g, const Vec2& x) {
  const Vec2 u = g.lattice_inverse() * x;
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::Matrix<double, 4, 2> du;  // d rho / d u
  du.setZero();
  du(0, 0) = -two_pi * std::sin(two_pi * u[0]);
  du(1, 0) = two_pi * std::cos(two_pi * u[0]);
  du(2, 1) = -two_pi * std::sin(two_pi * u[1]);
  du(3, 1) = two_pi * std::cos(two_pi * u[1]);
  return du * g.lattice_inverse();
}

Eigen::VectorXd rho_nd(const Eigen::MatrixXd& lattice_inverse, const Eigen::VectorXd& x) {
  const Eigen::VectorXd u = lattice_inverse * x;
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::VectorXd out(2 * u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    out[2 * i] = std::cos(two_pi * u[i]);
    out[2 * i + 1] = std::sin(two_pi * u[i]);
  }
  return out;
}

Vec2 gamma_symmetrize(const WallpaperGroup& g, const std::function<Vec2(const Vec2&)>& f,
                      const Vec2& x) {
  Vec2 acc = Vec2::Zero();
  for (const auto& phi : g.coset_reps()) {
    acc += phi.A.transpose() * f(apply_isometry(g, phi, x));
  }
  return acc / static_cast<double>(g.order());
}

}  // namespace cellflow
