#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "reflect/errors.hpp"
#include "reflect/geometry.hpp"
#include "reflect/grid.hpp"

namespace reflect {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class BoundaryCondition { dirichlet, neumann };

inline const char* to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::dirichlet ? "dirichlet" : "neumann";
}

/// Ghost-value sign: -1 (odd extension) for Dirichlet, +1 (even) for Neumann.
inline int reflection_sign(BoundaryCondition bc) {
  return bc == BoundaryCondition::dirichlet ? -1 : 1;
}

//---------------------------------------------------------------------------//
// Coefficients
//---------------------------------------------------------------------------//

/*!
 * Per-cell diffusion matrix A and potential V for -div(A grad) + V.
 *
 * A is stored in the leading d x d block of a 3 x 3 matrix. Construction
 * checks symmetry and computes the ellipticity bracket
 * theta_1 |xi|^2 <= <A xi, xi> <= theta_2 |xi|^2 from per-cell eigenvalues.
 */
class CoefficientField {
 public:
  CoefficientField() = default;

  CoefficientField(int dim, std::vector<Eigen::Matrix3d> A, std::vector<double> V)
      : dim_(dim), A_(std::move(A)), V_(std::move(V)) {
    if (dim < 1 || dim > 3) throw InvalidArgument("coefficient dimension must be 1..3");
    if (A_.size() != V_.size()) throw InvalidArgument("A and V differ in cell count");
    theta_lo_ = std::numeric_limits<double>::infinity();
    theta_hi_ = 0.0;
    for (Eigen::Matrix3d& a : A_) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          if (i >= dim || j >= dim) a(i, j) = 0.0;
      const Eigen::MatrixXd blk = a.topLeftCorner(dim, dim);
      if (!(blk.array() == blk.transpose().array()).all())
        throw InvalidArgument("diffusion matrix must be symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk, Eigen::EigenvaluesOnly);
      theta_lo_ = std::min(theta_lo_, es.eigenvalues().minCoeff());
      theta_hi_ = std::max(theta_hi_, es.eigenvalues().maxCoeff());
    }
    for (double v : V_)
      if (!std::isfinite(v)) throw InvalidArgument("potential must be finite");
    if (!A_.empty() && !(theta_lo_ > 0.0))
      throw InvalidArgument("diffusion matrix is not uniformly elliptic");
  }

  static CoefficientField constant(const GridDomain& g, const Eigen::MatrixXd& A, double V = 0.0) {
    if (A.rows() != g.dimension() || A.cols() != g.dimension())
      throw InvalidArgument("diffusion matrix size must equal grid dimension");
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a.topLeftCorner(g.dimension(), g.dimension()) = A;
    return CoefficientField(g.dimension(), std::vector<Eigen::Matrix3d>(g.size(), a),
                            std::vector<double>(g.size(), V));
  }

  static CoefficientField identity(const GridDomain& g, double V = 0.0) {
    return constant(g, Eigen::MatrixXd::Identity(g.dimension(), g.dimension()), V);
  }

  static CoefficientField sampled(const GridDomain& g,
                                  const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& A,
                                  const std::function<double(const Eigen::VectorXd&)>& V) {
    std::vector<Eigen::Matrix3d> as(g.size(), Eigen::Matrix3d::Zero());
    std::vector<double> vs(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Eigen::VectorXd x = g.center(c);
      const Eigen::MatrixXd a = A(x);
      if (a.rows() != g.dimension() || a.cols() != g.dimension())
        throw InvalidArgument("diffusion matrix size must equal grid dimension");
      as[c].topLeftCorner(g.dimension(), g.dimension()) = a;
      vs[c] = V(x);
    }
    return CoefficientField(g.dimension(), std::move(as), std::move(vs));
  }

  int dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return A_.size(); }
  const Eigen::Matrix3d& A(std::size_t c) const { return A_.at(c); }
  double V(std::size_t c) const { return V_.at(c); }
  double theta_lower() const noexcept { return theta_lo_; }
  double theta_upper() const noexcept { return theta_hi_; }

  bool is_diagonal() const {
    for (const auto& a : A_)
      for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
          if (i != j && a(i, j) != 0.0) return false;
    return true;
  }

  /// Value of V in (||V||_inf, ||V_-||_inf) form.
  std::pair<double, double> potential_norms() const {
    double sup = 0.0, neg = 0.0;
    for (double v : V_) {
      sup = std::max(sup, std::abs(v));
      neg = std::max(neg, -v);
    }
    return {sup, neg};
  }

 private:
  int dim_ = 1;
  std::vector<Eigen::Matrix3d> A_;
  std::vector<double> V_;
  double theta_lo_ = 0.0;
  double theta_hi_ = 0.0;
};

//---------------------------------------------------------------------------//
// Symmetric pairs
//---------------------------------------------------------------------------//

/// For each half-grid cell, the full-grid cell with the same lattice position.
inline std::vector<std::size_t> half_embedding(const GridDomain& half, const GridDomain& full) {
  if (!full.symmetric() || full.reflection()->kind() != Hyperplane::Kind::coordinate ||
      full.reflection()->axis() != 0)
    throw InvalidArgument("full grid is not symmetric in x_0");
  if (half.dimension() != full.dimension() || half.h() != full.h())
    throw InvalidArgument("grid pair differs in dimension or cell width");
  const int shift = full.extent()[0] / 2;
  if (half.extent()[0] != shift) throw InvalidArgument("half grid does not match parent extent");
  std::vector<std::size_t> emb(half.size());
  std::vector<char> hit(full.size(), 0);
  for (std::size_t c = 0; c < half.size(); ++c) {
    CellIndex idx = half.index(c);
    idx[0] += shift;
    auto f = full.find(idx);
    if (!f) throw InvalidArgument("half grid cell missing from parent");
    emb[c] = *f;
    hit[*f] = 1;
  }
  for (std::size_t c = 0; c < full.size(); ++c)
    if (full.index(c)[0] >= shift && !hit[c])
      throw InvalidArgument("parent cell on the positive side missing from half grid");
  return emb;
}

/// A~ = U (A o M) U, V~ = V o M on the mirrored half; A, V unchanged on the original half.
inline CoefficientField reflect_coefficients(const CoefficientField& field, const GridDomain& half,
                                             const GridDomain& full) {
  if (field.size() != half.size()) throw InvalidArgument("field does not live on the half grid");
  const auto emb = half_embedding(half, full);
  std::vector<Eigen::Matrix3d> A(full.size());
  std::vector<double> V(full.size());
  Eigen::Matrix3d U = Eigen::Matrix3d::Identity();
  U(0, 0) = -1.0;
  for (std::size_t c = 0; c < half.size(); ++c) {
    const std::size_t inner = emb[c];
    const std::size_t outer = full.mirror(inner);
    A[inner] = field.A(c);
    A[outer] = U * field.A(c) * U;
    V[inner] = field.V(c);
    V[outer] = field.V(c);
  }
  return CoefficientField(full.dimension(), std::move(A), std::move(V));
}

//---------------------------------------------------------------------------//
// Assembly
//---------------------------------------------------------------------------//

struct DiscreteSystem {
  SparseMatrix H;
  std::vector<char> control;  // 1 on cells of omega
  BoundaryCondition bc = BoundaryCondition::dirichlet;
  GridDomain grid;

  Eigen::Index size() const noexcept { return H.rows(); }

  SparseMatrix B() const {
    SparseMatrix b(H.rows(), H.cols());
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t c = 0; c < control.size(); ++c)
      if (control[c]) t.emplace_back(static_cast<int>(c), static_cast<int>(c), 1.0);
    b.setFromTriplets(t.begin(), t.end());
    return b;
  }
};

namespace detail {

/// Symmetric accumulator: every off-diagonal contribution lands on (p,q) and (q,p)
/// in the same order, so the result is bitwise symmetric.
class SymmetricAccumulator {
 public:
  explicit SymmetricAccumulator(std::size_t n) : rows_(n) {}

  void add_pair(std::size_t p, std::size_t q, double v) {
    if (p == q) {
      rows_[p][p] += 2.0 * v;
    } else {
      rows_[p][q] += v;
      rows_[q][p] += v;
    }
  }
  void add_diag(std::size_t p, double v) { rows_[p][p] += v; }

  SparseMatrix finish() const {
    const auto n = static_cast<Eigen::Index>(rows_.size());
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t r = 0; r < rows_.size(); ++r)
      for (const auto& [c, v] : rows_[r])
        t.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
  }

 private:
  std::vector<std::map<std::size_t, double>> rows_;
};

struct GhostRef {
  std::size_t cell;
  double sign;
};

/// Neighbor value along +/- axis; a missing neighbor is the ghost lambda * u(c)
/// obtained by reflecting across the boundary face.
inline GhostRef neighbor_or_ghost(const GridDomain& g, std::size_t c, int axis, int dir, double lambda) {
  CellIndex idx = g.index(c);
  idx[static_cast<std::size_t>(axis)] += dir;
  if (auto f = g.find(idx)) return {*f, 1.0};
  return {c, lambda};
}

}  // namespace detail

/*!
 * Cell-centered flux-form discretization of -div(A grad) + V.
 *
 * Assembled from the discrete energy
 *   sum_faces a_face (u_c - u_c')^2 / h^2
 *   + sum_boundary faces (1 - lambda) A_kk(c) u_c^2 / h^2
 *   + sum_cells sum_{k != l} A_kl(c) D_k u(c) D_l u(c)
 *   + sum_cells V(c) u_c^2
 * with arithmetic face averages a_face = (A_kk(c) + A_kk(c')) / 2, centered
 * differences D_k over 2h, and ghost values u_ghost = lambda u_c
 * (lambda = -1 Dirichlet, +1 Neumann). Off-diagonal A is only accepted on box
 * grids; the stair-stepped triangle and prism boundaries take scalar A.
 */
inline DiscreteSystem assemble_operator(const GridDomain& grid, const CoefficientField& field,
                                        BoundaryCondition bc, std::vector<char> control = {}) {
  if (field.size() != grid.size() || field.dimension() != grid.dimension())
    throw InvalidArgument("coefficient field does not match grid");
  if (control.empty()) control.assign(grid.size(), 0);
  if (control.size() != grid.size()) throw InvalidArgument("control mask does not match grid");

  const bool staircase =
      grid.shape() == GridShape::right_triangle || grid.shape() == GridShape::prism;
  if (staircase && !field.is_diagonal())
    throw UnsupportedConfiguration(
        "full-tensor diffusion on a stair-stepped diagonal boundary is not supported");

  const int d = grid.dimension();
  const double lambda = reflection_sign(bc);
  const double inv_h2 = 1.0 / (grid.h() * grid.h());
  const double half_inv_h = 0.5 / grid.h();
  detail::SymmetricAccumulator acc(grid.size());

  // Diagonal: every face as if it had a neighbor, then V, then the ghost
  // couplings -lambda w. This fixed order makes the half-grid diagonal round
  // exactly like (full diagonal) + lambda (coupling across the mirror face).
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const Eigen::Matrix3d& Ac = field.A(c);
    double diag = 0.0;
    double ghost[6];
    int ghosts = 0;
    for (int k = 0; k < d; ++k)
      for (int dir : {-1, 1}) {
        CellIndex idx = grid.index(c);
        idx[static_cast<std::size_t>(k)] += dir;
        const auto nb = grid.find(idx);
        const double other = nb ? field.A(*nb)(k, k) : Ac(k, k);
        const double w = 0.5 * (Ac(k, k) + other) * inv_h2;
        diag += w;
        if (!nb) ghost[ghosts++] = -lambda * w;
        else if (dir > 0) acc.add_pair(c, *nb, -w);
      }
    diag += field.V(c);
    for (int i = 0; i < ghosts; ++i) diag += ghost[i];
    acc.add_diag(c, diag);
  }
  // Mixed terms: A_kl D_k u D_l u + A_lk D_l u D_k u for k < l.
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const Eigen::Matrix3d& Ac = field.A(c);
    for (int k = 0; k < d; ++k)
      for (int l = k + 1; l < d; ++l) {
        const double akl = Ac(k, l);
        if (akl == 0.0) continue;
        const auto kp = detail::neighbor_or_ghost(grid, c, k, 1, lambda);
        const auto km = detail::neighbor_or_ghost(grid, c, k, -1, lambda);
        const auto lp = detail::neighbor_or_ghost(grid, c, l, 1, lambda);
        const auto lm = detail::neighbor_or_ghost(grid, c, l, -1, lambda);
        const std::pair<std::size_t, double> dk[2] = {{kp.cell, kp.sign * half_inv_h},
                                                      {km.cell, -km.sign * half_inv_h}};
        const std::pair<std::size_t, double> dl[2] = {{lp.cell, lp.sign * half_inv_h},
                                                      {lm.cell, -lm.sign * half_inv_h}};
        for (const auto& [p, alpha] : dk)
          for (const auto& [q, beta] : dl) acc.add_pair(p, q, akl * alpha * beta);
      }
  }

  return DiscreteSystem{acc.finish(), std::move(control), bc, grid};
}

/// Cells whose centers lie in the region.
inline std::vector<char> control_cells(const GridDomain& grid, const RegionSet& region) {
  if (region.dimension() != grid.dimension())
    throw InvalidArgument("control region dimension does not match grid");
  std::vector<char> mask(grid.size(), 0);
  for (std::size_t c = 0; c < grid.size(); ++c) mask[c] = region.contains(grid.center(c)) ? 1 : 0;
  return mask;
}

/// omega~ = omega u M(omega) on the parent grid.
inline std::vector<char> mirror_control(const std::vector<char>& half_mask, const GridDomain& half,
                                        const GridDomain& full) {
  if (half_mask.size() != half.size()) throw InvalidArgument("control mask does not match grid");
  const auto emb = half_embedding(half, full);
  std::vector<char> mask(full.size(), 0);
  for (std::size_t c = 0; c < half.size(); ++c)
    if (half_mask[c]) {
      mask[emb[c]] = 1;
      mask[full.mirror(emb[c])] = 1;
    }
  return mask;
}

/// omega = omega~ restricted to the half grid.
inline std::vector<char> restrict_control(const std::vector<char>& full_mask, const GridDomain& half,
                                          const GridDomain& full) {
  if (full_mask.size() != full.size()) throw InvalidArgument("control mask does not match grid");
  const auto emb = half_embedding(half, full);
  std::vector<char> mask(half.size(), 0);
  for (std::size_t c = 0; c < half.size(); ++c) mask[c] = full_mask[emb[c]];
  return mask;
}

//---------------------------------------------------------------------------//
// Extension / restriction operators
//---------------------------------------------------------------------------//

/// X f = f (+) lambda f o M ; Xstar g = (g + lambda g o M)|_half ; Xstar X = 2 I.
struct ReflectionOperators {
  SparseMatrix X;
  SparseMatrix Xstar;
  int lambda = -1;
  std::vector<std::size_t> embedding;  // half cell -> full cell
};

inline ReflectionOperators build_reflection_operators(const GridDomain& half, const GridDomain& full,
                                                      BoundaryCondition bc) {
  ReflectionOperators ops;
  ops.lambda = reflection_sign(bc);
  ops.embedding = half_embedding(half, full);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(2 * half.size());
  for (std::size_t c = 0; c < half.size(); ++c) {
    const auto inner = static_cast<int>(ops.embedding[c]);
    const auto outer = static_cast<int>(full.mirror(ops.embedding[c]));
    t.emplace_back(inner, static_cast<int>(c), 1.0);
    t.emplace_back(outer, static_cast<int>(c), static_cast<double>(ops.lambda));
  }
  ops.X.resize(static_cast<Eigen::Index>(full.size()), static_cast<Eigen::Index>(half.size()));
  ops.X.setFromTriplets(t.begin(), t.end());
  ops.X.makeCompressed();
  ops.Xstar = SparseMatrix(ops.X.transpose());
  ops.Xstar.makeCompressed();
  return ops;
}

inline double max_abs(const SparseMatrix& m) {
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

/// max |Xstar H~ - H Xstar| entrywise.
inline double check_discrete_intertwining(const ReflectionOperators& ops, const SparseMatrix& H_half,
                                          const SparseMatrix& H_full) {
  if (H_half.rows() != ops.Xstar.rows() || H_full.rows() != ops.Xstar.cols())
    throw InvalidArgument("operator sizes do not match reflection operators");
  const SparseMatrix lhs = ops.Xstar * H_full;
  const SparseMatrix rhs = H_half * ops.Xstar;
  return max_abs(SparseMatrix(lhs - rhs));
}

/// Xstar diag(chi_omega~) == diag(chi_omega) Xstar, compared exactly.
inline bool check_control_commutation(const ReflectionOperators& ops,
                                      const std::vector<char>& omega_half,
                                      const std::vector<char>& omega_full) {
  if (static_cast<Eigen::Index>(omega_half.size()) != ops.Xstar.rows() ||
      static_cast<Eigen::Index>(omega_full.size()) != ops.Xstar.cols())
    throw InvalidArgument("control masks do not match reflection operators");
  for (int r = 0; r < ops.Xstar.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(ops.Xstar, r); it; ++it) {
      const double lhs = it.value() * (omega_full[static_cast<std::size_t>(it.col())] ? 1.0 : 0.0);
      const double rhs = (omega_half[static_cast<std::size_t>(r)] ? 1.0 : 0.0) * it.value();
      if (lhs != rhs) return false;
    }
  return true;
}

/*!
 * Face-gradient relation on the mirrored half: for every face between two
 * cells with x_0 < 0, grad_k(X f) = lambda U_kk grad_k f at the mirror face.
 * Returns the largest absolute defect.
 */
inline double discrete_gradient_relation(const ReflectionOperators& ops, const GridDomain& half,
                                         const GridDomain& full, const Eigen::VectorXd& f) {
  if (f.size() != static_cast<Eigen::Index>(half.size()))
    throw InvalidArgument("vector does not live on the half grid");
  const Eigen::VectorXd g = ops.X * f;
  std::vector<long> full_to_half(full.size(), -1);
  for (std::size_t c = 0; c < half.size(); ++c) full_to_half[ops.embedding[c]] = static_cast<long>(c);
  const int shift = full.extent()[0] / 2;
  const double h = full.h();
  double defect = 0.0;
  for (std::size_t p = 0; p < full.size(); ++p) {
    if (full.index(p)[0] >= shift) continue;
    for (int k = 0; k < full.dimension(); ++k) {
      CellIndex idx = full.index(p);
      idx[static_cast<std::size_t>(k)] += 1;
      const auto q = full.find(idx);
      if (!q || full.index(*q)[0] >= shift) continue;
      const double grad_g = (g[static_cast<Eigen::Index>(*q)] - g[static_cast<Eigen::Index>(p)]) / h;
      const auto mp = full_to_half[full.mirror(p)];
      const auto mq = full_to_half[full.mirror(*q)];
      // The mirror face runs from M(q) to M(p) along x_0 and from M(p) to M(q) otherwise.
      const double grad_f = k == 0 ? (f[mp] - f[mq]) / h : (f[mq] - f[mp]) / h;
      const double u_kk = k == 0 ? -1.0 : 1.0;
      defect = std::max(defect, std::abs(grad_g - ops.lambda * u_kk * grad_f));
    }
  }
  return defect;
}

}  // namespace reflect
