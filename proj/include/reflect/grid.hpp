#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reflect/errors.hpp"
#include "reflect/geometry.hpp"

namespace reflect {

enum class GridShape { interval, sym_interval, rectangle, square, right_triangle, prism, half_domain };

inline const char* to_string(GridShape s) {
  switch (s) {
    case GridShape::interval: return "interval";
    case GridShape::sym_interval: return "sym_interval";
    case GridShape::rectangle: return "rectangle";
    case GridShape::square: return "square";
    case GridShape::right_triangle: return "right_triangle";
    case GridShape::prism: return "prism";
    case GridShape::half_domain: return "half_domain";
  }
  return "?";
}

using CellIndex = std::array<int, 3>;

/*!
 * Cell-centered uniform grid.
 *
 * Cells are the active subset of an axis-aligned lattice box with `extent`
 * cells per axis starting at `origin`; cell (i_0, ..., i_{d-1}) has center
 * origin + (i + 1/2) h. A grid symmetric under x_0 -> -x_0 carries the
 * reflection and the cell involution realizing it.
 */
class GridDomain {
 public:
  GridDomain() = default;

  GridDomain(GridShape shape, int dim, double h, std::array<double, 3> origin,
             std::array<int, 3> extent, const std::vector<CellIndex>& cells, double length)
      : shape_(shape), dim_(dim), h_(h), origin_(origin), extent_(extent), length_(length) {
    if (dim < 1 || dim > 3) throw InvalidArgument("grid dimension must be 1, 2 or 3");
    if (!(h > 0.0)) throw InvalidArgument("cell width must be positive");
    for (int k = dim; k < 3; ++k) extent_[static_cast<std::size_t>(k)] = 1;
    lookup_.assign(static_cast<std::size_t>(extent_[0]) * extent_[1] * extent_[2], -1);
    for (const CellIndex& idx : cells) add_cell(idx);
    detect_reflection();
  }

  GridShape shape() const noexcept { return shape_; }
  int dimension() const noexcept { return dim_; }
  double h() const noexcept { return h_; }
  double length() const noexcept { return length_; }
  std::size_t size() const noexcept { return cells_.size(); }
  const std::array<double, 3>& origin() const noexcept { return origin_; }
  const std::array<int, 3>& extent() const noexcept { return extent_; }
  const CellIndex& index(std::size_t c) const { return cells_.at(c); }

  Eigen::VectorXd center(std::size_t c) const {
    Eigen::VectorXd x(dim_);
    for (int k = 0; k < dim_; ++k) x[k] = coordinate(k, cells_[c][static_cast<std::size_t>(k)]);
    return x;
  }

  double coordinate(int axis, int i) const {
    return origin_[static_cast<std::size_t>(axis)] + (i + 0.5) * h_;
  }

  /// Active cell at a lattice index, if any.
  std::optional<std::size_t> find(const CellIndex& idx) const {
    for (int k = 0; k < 3; ++k)
      if (idx[static_cast<std::size_t>(k)] < 0 ||
          idx[static_cast<std::size_t>(k)] >= extent_[static_cast<std::size_t>(k)])
        return std::nullopt;
    const long v = lookup_[flat(idx)];
    if (v < 0) return std::nullopt;
    return static_cast<std::size_t>(v);
  }

  /// Active cell whose closure contains x (ties resolved upward).
  std::optional<std::size_t> locate(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw InvalidArgument("point dimension does not match grid");
    CellIndex idx{0, 0, 0};
    for (int k = 0; k < dim_; ++k)
      idx[static_cast<std::size_t>(k)] =
          static_cast<int>(std::floor((x[k] - origin_[static_cast<std::size_t>(k)]) / h_));
    return find(idx);
  }

  const std::optional<Hyperplane>& reflection() const noexcept { return reflection_; }
  bool symmetric() const noexcept { return reflection_.has_value(); }

  /// Index involution realizing the reflection; requires symmetric().
  std::size_t mirror(std::size_t c) const {
    if (!reflection_) throw InvalidArgument("grid carries no reflection");
    return mirror_[c];
  }

  /// Same cells, enumerated in the order given by perm (new position i holds old cell perm[i]).
  GridDomain permuted(std::span<const std::size_t> perm) const {
    if (perm.size() != size()) throw InvalidArgument("permutation size mismatch");
    std::vector<CellIndex> cells;
    cells.reserve(size());
    std::vector<char> seen(size(), 0);
    for (std::size_t p : perm) {
      if (p >= size() || seen[p]) throw InvalidArgument("not a permutation");
      seen[p] = 1;
      cells.push_back(cells_[p]);
    }
    return GridDomain(shape_, dim_, h_, origin_, extent_, cells, length_);
  }

 private:
  std::size_t flat(const CellIndex& idx) const {
    return static_cast<std::size_t>(idx[0]) +
           static_cast<std::size_t>(extent_[0]) *
               (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(extent_[1]) * idx[2]);
  }

  void add_cell(CellIndex idx) {
    for (int k = dim_; k < 3; ++k) idx[static_cast<std::size_t>(k)] = 0;
    for (int k = 0; k < 3; ++k)
      if (idx[static_cast<std::size_t>(k)] < 0 ||
          idx[static_cast<std::size_t>(k)] >= extent_[static_cast<std::size_t>(k)])
        throw InvalidArgument("cell index outside lattice box");
    const std::size_t f = flat(idx);
    if (lookup_[f] >= 0) throw InvalidArgument("duplicate cell");
    lookup_[f] = static_cast<long>(cells_.size());
    cells_.push_back(idx);
  }

  // Symmetric in x_0 when the lattice box straddles x_0 = 0 with a face on it and
  // the active set is invariant under i_0 -> n_0 - 1 - i_0.
  void detect_reflection() {
    const int n0 = extent_[0];
    if (n0 % 2 != 0) return;
    if (std::abs(origin_[0] + 0.5 * n0 * h_) > 1e-12 * h_) return;
    std::vector<std::size_t> m(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      CellIndex j = cells_[c];
      j[0] = n0 - 1 - j[0];
      auto f = find(j);
      if (!f) return;
      m[c] = *f;
    }
    mirror_ = std::move(m);
    reflection_ = Hyperplane::coordinate(0);
  }

  GridShape shape_ = GridShape::interval;
  int dim_ = 1;
  double h_ = 1.0;
  std::array<double, 3> origin_{0.0, 0.0, 0.0};
  std::array<int, 3> extent_{1, 1, 1};
  double length_ = 1.0;
  std::vector<CellIndex> cells_;
  std::vector<long> lookup_;
  std::optional<Hyperplane> reflection_;
  std::vector<std::size_t> mirror_;
};

namespace detail {

inline void check_size(double L, int n) {
  if (!(L > 0.0) || !std::isfinite(L)) throw InvalidArgument("domain length must be positive");
  if (n < 2) throw InvalidArgument("cell count must be >= 2");
}

inline std::vector<CellIndex> all_cells(std::array<int, 3> extent, int dim) {
  for (int k = dim; k < 3; ++k) extent[static_cast<std::size_t>(k)] = 1;
  std::vector<CellIndex> cells;
  for (int k2 = 0; k2 < extent[2]; ++k2)
    for (int k1 = 0; k1 < extent[1]; ++k1)
      for (int k0 = 0; k0 < extent[0]; ++k0) cells.push_back({k0, k1, k2});
  return cells;
}

}  // namespace detail

/// (0, L) with n cells.
inline GridDomain make_interval(double L, int n) {
  detail::check_size(L, n);
  return GridDomain(GridShape::interval, 1, L / n, {0.0, 0.0, 0.0}, {n, 1, 1},
                    detail::all_cells({n, 1, 1}, 1), L);
}

/// (-L, L) with n cells in total (n even, so no center sits at 0).
inline GridDomain make_sym_interval(double L, int n) {
  detail::check_size(L, n);
  if (n % 2 != 0) throw InvalidArgument("symmetric interval needs an even cell count");
  return GridDomain(GridShape::sym_interval, 1, 2.0 * L / n, {-L, 0.0, 0.0}, {n, 1, 1},
                    detail::all_cells({n, 1, 1}, 1), L);
}

/// Axis-aligned box prod (lo_k, hi_k) with a common cell width h = (hi_0 - lo_0) / counts_0.
inline GridDomain make_rectangle(std::span<const double> lo, std::span<const double> hi,
                                 std::span<const int> counts) {
  const int d = static_cast<int>(lo.size());
  if (d < 1 || d > 3 || hi.size() != lo.size() || counts.size() != lo.size())
    throw InvalidArgument("rectangle needs 1..3 matching bounds and counts");
  std::array<double, 3> origin{0.0, 0.0, 0.0};
  std::array<int, 3> extent{1, 1, 1};
  const double h = (hi[0] - lo[0]) / counts[0];
  for (int k = 0; k < d; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    detail::check_size(hi[ku] - lo[ku], counts[ku]);
    const double hk = (hi[ku] - lo[ku]) / counts[ku];
    if (std::abs(hk - h) > 1e-12 * h) throw InvalidArgument("rectangle cells must be square");
    origin[ku] = lo[ku];
    extent[ku] = counts[ku];
  }
  return GridDomain(GridShape::rectangle, d, h, origin, extent, detail::all_cells(extent, d),
                    hi[0] - lo[0]);
}

/// (0, L)^d with n cells per axis.
inline GridDomain make_square(double L, int n, int d) {
  detail::check_size(L, n);
  if (d < 1 || d > 3) throw InvalidArgument("square dimension must be 1..3");
  std::array<int, 3> extent{n, d > 1 ? n : 1, d > 2 ? n : 1};
  return GridDomain(GridShape::square, d, L / n, {0.0, 0.0, 0.0}, extent,
                    detail::all_cells(extent, d), L);
}

/// (-L, L) x (-L, L)^{d-1} with n cells per axis (n even); symmetric in x_0.
inline GridDomain make_sym_square(double L, int n, int d) {
  detail::check_size(L, n);
  if (n % 2 != 0) throw InvalidArgument("symmetric square needs an even cell count");
  std::vector<double> lo(static_cast<std::size_t>(d), -L), hi(static_cast<std::size_t>(d), L);
  std::vector<int> counts(static_cast<std::size_t>(d), n);
  return make_rectangle(lo, hi, counts);
}

/// Cells of (0, L)^2 whose centers satisfy y < x (stair-stepped diagonal).
inline GridDomain make_right_triangle(double L, int n) {
  detail::check_size(L, n);
  std::vector<CellIndex> cells;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (j < i) cells.push_back({i, j, 0});
  return GridDomain(GridShape::right_triangle, 2, L / n, {0.0, 0.0, 0.0}, {n, n, 1}, cells, L);
}

/// Triangle grid times (0, L).
inline GridDomain make_prism(double L, int n) {
  detail::check_size(L, n);
  std::vector<CellIndex> cells;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (j < i) cells.push_back({i, j, k});
  return GridDomain(GridShape::prism, 3, L / n, {0.0, 0.0, 0.0}, {n, n, n}, cells, L);
}

struct GridSpec {
  GridShape shape = GridShape::interval;
  double L = 1.0;
  int cells = 8;  // per axis; total for sym_interval
  int dimension = 1;
};

inline GridDomain build_grid(const GridSpec& s) {
  switch (s.shape) {
    case GridShape::interval: return make_interval(s.L, s.cells);
    case GridShape::sym_interval: return make_sym_interval(s.L, s.cells);
    case GridShape::square: return make_square(s.L, s.cells, s.dimension);
    // The symmetric parent box (-L, L)^d; general rectangles use make_rectangle.
    case GridShape::rectangle: return make_sym_square(s.L, s.cells, s.dimension);
    case GridShape::right_triangle: return make_right_triangle(s.L, s.cells);
    case GridShape::prism: return make_prism(s.L, s.cells);
    case GridShape::half_domain: break;
  }
  throw InvalidArgument("half_domain grids are derived with half_domain(parent)");
}

/// The part x_0 > 0 of a grid symmetric in x_0, as a grid of its own.
inline GridDomain half_domain(const GridDomain& parent) {
  if (!parent.symmetric() || parent.reflection()->kind() != Hyperplane::Kind::coordinate ||
      parent.reflection()->axis() != 0)
    throw InvalidArgument("parent grid is not symmetric in x_0");
  const int half = parent.extent()[0] / 2;
  std::vector<CellIndex> cells;
  for (std::size_t c = 0; c < parent.size(); ++c) {
    CellIndex idx = parent.index(c);
    if (idx[0] >= half) {
      idx[0] -= half;
      cells.push_back(idx);
    }
  }
  std::array<double, 3> origin = parent.origin();
  origin[0] = 0.0;
  std::array<int, 3> extent = parent.extent();
  extent[0] = half;
  return GridDomain(GridShape::half_domain, parent.dimension(), parent.h(), origin, extent, cells,
                    parent.length());
}

}  // namespace reflect
