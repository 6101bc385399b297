#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "reflect/errors.hpp"

namespace reflect {

using Point = Eigen::VectorXd;

//---------------------------------------------------------------------------//
// Reflection hyperplanes
//---------------------------------------------------------------------------//

/*!
 * Mirror hyperplane through the origin.
 *
 * A coordinate plane {x_k = 0} or the boundary of the sector
 * H_theta = {x_2 < tan(theta) x_1}, which acts in the first two coordinates.
 * The positive side of the plane is x_k > 0 resp. the interior of H_theta.
 */
class Hyperplane {
 public:
  enum class Kind { coordinate, sector_boundary };

  static Hyperplane coordinate(int axis) {
    if (axis < 0) throw InvalidArgument("hyperplane axis must be non-negative");
    return Hyperplane(Kind::coordinate, axis, 0.0);
  }

  static Hyperplane sector_boundary(double theta) {
    if (!(theta >= 0.0 && theta < std::numbers::pi / 2))
      throw InvalidArgument("sector angle must lie in [0, pi/2)");
    return Hyperplane(Kind::sector_boundary, 0, theta);
  }

  Kind kind() const noexcept { return kind_; }
  int axis() const noexcept { return axis_; }
  double angle() const noexcept { return theta_; }

  /// Smallest ambient dimension in which the plane makes sense.
  int min_dimension() const noexcept {
    return kind_ == Kind::coordinate ? axis_ + 1 : 2;
  }

  /// Signed side function: positive on the kept side, zero on the plane.
  double side(const Point& x) const {
    check_dimension(x);
    if (kind_ == Kind::coordinate) return x[axis_];
    return std::sin(theta_) * x[0] - std::cos(theta_) * x[1];
  }

  /// Householder reflection x - 2<n,x>n with n = (sin t, -cos t, 0, ...), i.e.
  /// (x, y) -> (cos 2t x + sin 2t y, sin 2t x - cos 2t y). Evaluated in extended
  /// precision so that reflecting twice returns x to a few ulps.
  Point reflect(const Point& x) const {
    check_dimension(x);
    Point y = x;
    if (kind_ == Kind::coordinate) {
      y[axis_] = -x[axis_];
      return y;
    }
    const long double t2 = 2.0L * static_cast<long double>(theta_);
    const long double c2 = std::cos(t2);
    const long double s2 = std::sin(t2);
    const long double x0 = x[0], x1 = x[1];
    y[0] = static_cast<double>(c2 * x0 + s2 * x1);
    y[1] = static_cast<double>(s2 * x0 - c2 * x1);
    return y;
  }

  bool operator==(const Hyperplane&) const = default;

 private:
  Hyperplane(Kind k, int axis, double theta) : kind_(k), axis_(axis), theta_(theta) {}

  void check_dimension(const Point& x) const {
    if (x.size() < min_dimension())
      throw InvalidArgument("point dimension " + std::to_string(x.size()) +
                            " too small for hyperplane");
  }

  Kind kind_;
  int axis_;
  double theta_;
};

inline Point reflect_point(const Point& x, const Hyperplane& h) { return h.reflect(x); }

//---------------------------------------------------------------------------//
// Certified parameters
//---------------------------------------------------------------------------//

/// (gamma, a) of a thick set together with the chain of transforms that produced it.
struct ThicknessParams {
  double gamma = 1.0;
  std::vector<double> a;
  std::string provenance = "given";

  ThicknessParams() = default;
  ThicknessParams(double g, std::vector<double> lengths, std::string prov = "given")
      : gamma(g), a(std::move(lengths)), provenance(std::move(prov)) {
    validate();
  }

  int dimension() const noexcept { return static_cast<int>(a.size()); }

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
    if (a.empty()) throw InvalidArgument("thickness lengths must be non-empty");
    for (double aj : a)
      if (!(aj > 0.0) || !std::isfinite(aj))
        throw InvalidArgument("thickness lengths must be positive and finite");
  }
};

/// (G, delta) of an equidistributed set.
struct EquidistParams {
  double G = 1.0;
  double delta = 0.25;
  std::string provenance = "given";

  EquidistParams() = default;
  EquidistParams(double g, double d, std::string prov = "given")
      : G(g), delta(d), provenance(std::move(prov)) {
    validate();
  }

  void validate() const {
    if (!(G > 0.0) || !std::isfinite(G)) throw InvalidArgument("G must be positive");
    if (!(delta > 0.0 && delta < G / 2)) throw InvalidArgument("delta must lie in (0, G/2)");
  }
};

//---------------------------------------------------------------------------//
// Region sets
//---------------------------------------------------------------------------//

/// Closed axis-aligned box [lo, hi].
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(const Point& x) const {
    for (std::size_t k = 0; k < lo.size(); ++k)
      if (x[static_cast<Eigen::Index>(k)] < lo[k] || x[static_cast<Eigen::Index>(k)] > hi[k])
        return false;
    return true;
  }
};

struct LatticeBall {
  std::vector<long> index;  // lattice cell j of G*j + (0,G)^d
  Point center;
};

class RegionSet;

namespace detail {
struct RegionNode;
}

struct FullSpace {};
struct EmptySet {};

/// Union over k in Z^d of (boxes + k * period); boxes live in one period cell.
struct PeriodicBoxes {
  std::vector<double> period;
  std::vector<Box> boxes;
};

/// Union of closed balls B(z_j, delta), at most one per G-lattice cell.
struct BallLattice {
  double G = 1.0;
  double delta = 0.25;
  std::vector<LatticeBall> balls;
};

/// Opaque predicate; cannot be serialized.
struct CustomPredicate {
  std::function<bool(const Point&)> predicate;
  std::string label;
};

class RegionSet {
 public:
  RegionSet() = default;

  static RegionSet full_space(int dim);
  static RegionSet empty(int dim);
  static RegionSet periodic_boxes(std::vector<double> period, std::vector<Box> boxes);
  static RegionSet ball_lattice(int dim, double G, double delta, std::vector<LatticeBall> balls);
  static RegionSet custom(int dim, std::function<bool(const Point&)> pred, std::string label = "custom");
  /// Keeps the closed positive side of the plane.
  static RegionSet clipped(RegionSet base, Hyperplane plane);
  /// Keeps the closed positive orthant.
  static RegionSet clipped_orthant(RegionSet base);
  static RegionSet reflected(RegionSet base, Hyperplane plane);
  static RegionSet union_of(std::vector<RegionSet> members);
  /// {x : (|x_1|, ..., |x_d|) in base}
  static RegionSet abs_pullback(RegionSet base);

  int dimension() const;
  bool contains(const Point& x) const;
  bool operator()(const Point& x) const { return contains(x); }

  const detail::RegionNode& node() const { return *node_; }
  bool valid() const noexcept { return static_cast<bool>(node_); }

  /// Non-null when the set is a plain periodic box pattern.
  const PeriodicBoxes* as_periodic() const;

 private:
  explicit RegionSet(std::shared_ptr<const detail::RegionNode> n) : node_(std::move(n)) {}
  std::shared_ptr<const detail::RegionNode> node_;
};

struct Clipped {
  RegionSet base;
  std::optional<Hyperplane> plane;  // empty: positive orthant
};

struct Reflected {
  RegionSet base;
  Hyperplane plane;
};

struct UnionSet {
  std::vector<RegionSet> members;
};

struct AbsPullback {
  RegionSet base;
};

namespace detail {

struct RegionNode {
  using Structure = std::variant<FullSpace, EmptySet, PeriodicBoxes, BallLattice, CustomPredicate,
                                 Clipped, Reflected, UnionSet, AbsPullback>;
  int dim = 1;
  Structure structure;
};

inline double floor_mod(double x, double p) {
  double r = std::fmod(x, p);
  if (r < 0) r += p;
  if (r >= p) r = 0.0;
  return r;
}

}  // namespace detail

inline int RegionSet::dimension() const {
  if (!node_) throw InvalidArgument("empty RegionSet handle");
  return node_->dim;
}

inline const PeriodicBoxes* RegionSet::as_periodic() const {
  return node_ ? std::get_if<PeriodicBoxes>(&node_->structure) : nullptr;
}

inline bool RegionSet::contains(const Point& x) const {
  if (!node_) throw InvalidArgument("empty RegionSet handle");
  if (x.size() != node_->dim)
    throw InvalidArgument("point dimension does not match region dimension");
  return std::visit(
      [&](const auto& s) -> bool {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, FullSpace>) {
          return true;
        } else if constexpr (std::is_same_v<S, EmptySet>) {
          return false;
        } else if constexpr (std::is_same_v<S, PeriodicBoxes>) {
          Point y(x.size());
          for (Eigen::Index k = 0; k < x.size(); ++k)
            y[k] = detail::floor_mod(x[k], s.period[static_cast<std::size_t>(k)]);
          for (const Box& b : s.boxes)
            if (b.contains(y)) return true;
          return false;
        } else if constexpr (std::is_same_v<S, BallLattice>) {
          const double r2 = s.delta * s.delta;
          for (const LatticeBall& ball : s.balls) {
            bool same_cell = true;
            for (Eigen::Index k = 0; k < x.size() && same_cell; ++k)
              same_cell = static_cast<long>(std::floor(x[k] / s.G)) ==
                          ball.index[static_cast<std::size_t>(k)];
            if (same_cell) return (x - ball.center).squaredNorm() <= r2;
          }
          return false;
        } else if constexpr (std::is_same_v<S, CustomPredicate>) {
          return s.predicate(x);
        } else if constexpr (std::is_same_v<S, Clipped>) {
          if (s.plane) {
            if (s.plane->side(x) < 0.0) return false;
          } else {
            for (Eigen::Index k = 0; k < x.size(); ++k)
              if (x[k] < 0.0) return false;
          }
          return s.base.contains(x);
        } else if constexpr (std::is_same_v<S, Reflected>) {
          return s.base.contains(s.plane.reflect(x));
        } else if constexpr (std::is_same_v<S, UnionSet>) {
          for (const RegionSet& m : s.members)
            if (m.contains(x)) return true;
          return false;
        } else {
          return s.base.contains(x.cwiseAbs());
        }
      },
      node_->structure);
}

inline RegionSet RegionSet::full_space(int dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  return RegionSet(std::make_shared<detail::RegionNode>(detail::RegionNode{dim, FullSpace{}}));
}

inline RegionSet RegionSet::empty(int dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  return RegionSet(std::make_shared<detail::RegionNode>(detail::RegionNode{dim, EmptySet{}}));
}

inline RegionSet RegionSet::periodic_boxes(std::vector<double> period, std::vector<Box> boxes) {
  const auto d = period.size();
  if (d == 0) throw InvalidArgument("period must be non-empty");
  for (double p : period)
    if (!(p > 0.0)) throw InvalidArgument("period components must be positive");
  for (const Box& b : boxes) {
    if (b.lo.size() != d || b.hi.size() != d) throw InvalidArgument("box dimension mismatch");
    for (std::size_t k = 0; k < d; ++k)
      if (b.lo[k] > b.hi[k] || b.lo[k] < 0.0 || b.hi[k] > period[k])
        throw InvalidArgument("periodic boxes must lie inside [0, period]");
  }
  return RegionSet(std::make_shared<detail::RegionNode>(detail::RegionNode{
      static_cast<int>(d), PeriodicBoxes{std::move(period), std::move(boxes)}}));
}

inline RegionSet RegionSet::ball_lattice(int dim, double G, double delta,
                                         std::vector<LatticeBall> balls) {
  EquidistParams(G, delta).validate();
  for (const LatticeBall& b : balls)
    if (static_cast<int>(b.index.size()) != dim || b.center.size() != dim)
      throw InvalidArgument("lattice ball dimension mismatch");
  return RegionSet(std::make_shared<detail::RegionNode>(
      detail::RegionNode{dim, BallLattice{G, delta, std::move(balls)}}));
}

inline RegionSet RegionSet::custom(int dim, std::function<bool(const Point&)> pred,
                                   std::string label) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  if (!pred) throw InvalidArgument("predicate must be callable");
  return RegionSet(std::make_shared<detail::RegionNode>(
      detail::RegionNode{dim, CustomPredicate{std::move(pred), std::move(label)}}));
}

inline RegionSet RegionSet::clipped(RegionSet base, Hyperplane plane) {
  const int d = base.dimension();
  if (plane.min_dimension() > d) throw InvalidArgument("hyperplane exceeds region dimension");
  return RegionSet(
      std::make_shared<detail::RegionNode>(detail::RegionNode{d, Clipped{std::move(base), plane}}));
}

inline RegionSet RegionSet::clipped_orthant(RegionSet base) {
  const int d = base.dimension();
  return RegionSet(std::make_shared<detail::RegionNode>(
      detail::RegionNode{d, Clipped{std::move(base), std::nullopt}}));
}

inline RegionSet RegionSet::reflected(RegionSet base, Hyperplane plane) {
  const int d = base.dimension();
  if (plane.min_dimension() > d) throw InvalidArgument("hyperplane exceeds region dimension");
  return RegionSet(std::make_shared<detail::RegionNode>(
      detail::RegionNode{d, Reflected{std::move(base), plane}}));
}

inline RegionSet RegionSet::union_of(std::vector<RegionSet> members) {
  if (members.empty()) throw InvalidArgument("union needs at least one member");
  const int d = members.front().dimension();
  for (const RegionSet& m : members)
    if (m.dimension() != d) throw InvalidArgument("union members differ in dimension");
  return RegionSet(std::make_shared<detail::RegionNode>(
      detail::RegionNode{d, UnionSet{std::move(members)}}));
}

inline RegionSet RegionSet::abs_pullback(RegionSet base) {
  const int d = base.dimension();
  return RegionSet(
      std::make_shared<detail::RegionNode>(detail::RegionNode{d, AbsPullback{std::move(base)}}));
}

/// Periodic slabs  U_k [k p + lo, k p + hi] x R^{d-1}  along axis 0.
inline RegionSet periodic_slabs(int dim, double period, double lo, double hi) {
  std::vector<double> per(static_cast<std::size_t>(dim), 1.0);
  per[0] = period;
  Box b;
  b.lo.assign(static_cast<std::size_t>(dim), 0.0);
  b.hi = per;
  b.lo[0] = lo;
  b.hi[0] = hi;
  return RegionSet::periodic_boxes(std::move(per), {std::move(b)});
}

//---------------------------------------------------------------------------//
// Symmetrization
//---------------------------------------------------------------------------//

struct SymmetrizedSet {
  RegionSet set;
  ThicknessParams params;
};

inline std::vector<double> check_params_for(const RegionSet& s, const ThicknessParams& p) {
  p.validate();
  if (p.dimension() != s.dimension())
    throw InvalidArgument("thickness parameters do not match set dimension");
  return p.a;
}

/// S~ = S' u M(S') with S' = S n {x_1 > 0}; (gamma/2, (2 a_1, a_2, ...)).
inline ThicknessParams halfspace_params(const ThicknessParams& p) {
  p.validate();
  std::vector<double> a = p.a;
  a[0] *= 2.0;
  return ThicknessParams(p.gamma / 2.0, std::move(a), p.provenance + "|halfspace");
}

inline SymmetrizedSet symmetrize_halfspace(const RegionSet& s, const ThicknessParams& p) {
  check_params_for(s, p);
  const Hyperplane m = Hyperplane::coordinate(0);
  RegionSet kept = RegionSet::clipped(s, m);
  RegionSet sym = RegionSet::union_of({kept, RegionSet::reflected(kept, m)});
  return {std::move(sym), halfspace_params(p)};
}

/// (gamma / 2^d, 2a).
inline ThicknessParams orthant_params(const ThicknessParams& p) {
  p.validate();
  std::vector<double> a = p.a;
  for (double& aj : a) aj *= 2.0;
  return ThicknessParams(std::ldexp(p.gamma, -p.dimension()), std::move(a),
                         p.provenance + "|orthant");
}

inline SymmetrizedSet symmetrize_orthant(const RegionSet& s, const ThicknessParams& p) {
  check_params_for(s, p);
  return {RegionSet::abs_pullback(s), orthant_params(p)};
}

/// gamma a1 a2 / (4 (a1^2 + a2^2)), a~ = (2 sqrt(a1^2 + a2^2), 2 sqrt(a1^2 + a2^2), a_3, ...).
inline ThicknessParams sector_params(const ThicknessParams& p) {
  p.validate();
  if (p.dimension() < 2) throw InvalidArgument("sector symmetrization needs d >= 2");
  // Extended precision with one final rounding, so gamma~ is the rounded exact rational.
  const long double a1 = p.a[0];
  const long double a2 = p.a[1];
  const long double r2 = a1 * a1 + a2 * a2;
  const double side = static_cast<double>(2.0L * std::sqrt(r2));
  std::vector<double> a = p.a;
  a[0] = side;
  a[1] = side;
  return ThicknessParams(static_cast<double>(p.gamma * a1 * a2 / (4.0L * r2)), std::move(a),
                         p.provenance + "|sector");
}

inline SymmetrizedSet symmetrize_sector(const RegionSet& s, const ThicknessParams& p,
                                        double theta) {
  check_params_for(s, p);
  const Hyperplane m = Hyperplane::sector_boundary(theta);
  if (s.dimension() < 2) throw InvalidArgument("sector symmetrization needs d >= 2");
  RegionSet kept = RegionSet::clipped(s, m);
  RegionSet sym = RegionSet::union_of({kept, RegionSet::reflected(kept, m)});
  return {std::move(sym), sector_params(p)};
}

/// Applies (gamma, a) -> (gamma/8, 2 sqrt(2) a) exactly n - 2 times (planar case).
inline ThicknessParams iterate_sector_symmetrization(const ThicknessParams& p, int n) {
  p.validate();
  if (n < 2) throw InvalidArgument("sector index n must be >= 2");
  if (p.dimension() != 2) throw InvalidArgument("sector iteration is planar (d = 2)");
  ThicknessParams out = p;
  const double stretch = 2.0 * std::numbers::sqrt2;
  for (int step = 2; step < n; ++step) {
    out.gamma /= 8.0;
    for (double& aj : out.a) aj *= stretch;
    out.provenance += "|sector-step";
  }
  return out;
}

//---------------------------------------------------------------------------//
// Thickness estimation
//---------------------------------------------------------------------------//

struct Window {
  std::vector<double> lo;
  std::vector<double> hi;
};

enum class MeasureMode { midpoint, exact_if_available };

struct ThicknessReport {
  double gamma_estimate = 0.0;
  std::vector<double> a;
  Window window;             // offsets actually scanned
  int resolution = 0;        // midpoint sub-grid points per axis inside each box
  int offsets_per_axis = 0;  // offset grid points per axis inside the window
  bool periodic_window = false;
  bool exact_measure = false;
  Point min_position;
  std::string note;
};

namespace detail {

inline double interval_overlap(double lo, double hi, double x, double len) {
  return std::max(0.0, std::min(hi, x + len) - std::max(lo, x));
}

/// Exact measure fraction for a periodic pattern of pairwise interior-disjoint boxes.
inline double exact_periodic_fraction(const PeriodicBoxes& pb, const Point& x,
                                      std::span<const double> a) {
  double total = 0.0;
  double volume = 1.0;
  for (double aj : a) volume *= aj;
  for (const Box& b : pb.boxes) {
    double prod = 1.0;
    for (std::size_t k = 0; k < a.size() && prod > 0.0; ++k) {
      const double p = pb.period[k];
      const double xk = x[static_cast<Eigen::Index>(k)];
      const auto first = static_cast<long>(std::floor((xk - b.hi[k]) / p)) - 1;
      const auto last = static_cast<long>(std::ceil((xk + a[k] - b.lo[k]) / p)) + 1;
      double sum = 0.0;
      for (long m = first; m <= last; ++m)
        sum += interval_overlap(b.lo[k] + m * p, b.hi[k] + m * p, xk, a[k]);
      prod *= sum;
    }
    total += prod;
  }
  return total / volume;
}

inline bool boxes_disjoint(const PeriodicBoxes& pb) {
  for (std::size_t i = 0; i < pb.boxes.size(); ++i)
    for (std::size_t j = i + 1; j < pb.boxes.size(); ++j) {
      double overlap = 1.0;
      for (std::size_t k = 0; k < pb.period.size(); ++k)
        overlap *= std::max(0.0, std::min(pb.boxes[i].hi[k], pb.boxes[j].hi[k]) -
                                     std::max(pb.boxes[i].lo[k], pb.boxes[j].lo[k]));
      if (overlap > 0.0) return false;
    }
  return true;
}

/// Calls f(point) for every node of a tensor grid; coordinates produced by coord(k, i).
template <class Coord, class F>
void for_each_tensor_point(int dim, int count, Coord&& coord, F&& f) {
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Point y(dim);
  while (true) {
    for (int k = 0; k < dim; ++k) y[k] = coord(k, idx[static_cast<std::size_t>(k)]);
    f(y);
    int k = 0;
    while (k < dim && ++idx[static_cast<std::size_t>(k)] == count) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == dim) break;
  }
}

}  // namespace detail

/*!
 * Minimum over sampled offsets x of |S n (x + Q_a)| / |Q_a|.
 *
 * Periodic box patterns scan one period cell of offsets and ignore `window`;
 * other sets scan the given window (inclusive endpoints). Box measure is the
 * midpoint rule with `resolution` points per axis unless `mode` asks for the
 * closed form and the set is a disjoint periodic box pattern.
 */
inline ThicknessReport certify_thickness(const RegionSet& s, std::span<const double> a,
                                         const std::optional<Window>& window, int resolution,
                                         int offsets_per_axis = 16,
                                         MeasureMode mode = MeasureMode::midpoint) {
  const int d = s.dimension();
  if (static_cast<int>(a.size()) != d) throw InvalidArgument("box lengths do not match dimension");
  for (double aj : a)
    if (!(aj > 0.0)) throw InvalidArgument("box lengths must be positive");
  if (resolution < 2) throw InvalidArgument("resolution must be >= 2");
  if (offsets_per_axis < 1) throw InvalidArgument("offset count must be positive");

  ThicknessReport rep;
  rep.a.assign(a.begin(), a.end());
  rep.resolution = resolution;
  rep.offsets_per_axis = offsets_per_axis;

  const PeriodicBoxes* periodic = s.as_periodic();
  if (periodic) {
    rep.periodic_window = true;
    rep.window.lo.assign(static_cast<std::size_t>(d), 0.0);
    rep.window.hi = periodic->period;
    rep.note = "offsets cover one period cell; periodicity extends the bound to R^d";
  } else {
    if (!window) throw InvalidArgument("non-periodic sets need an offset window");
    if (static_cast<int>(window->lo.size()) != d || static_cast<int>(window->hi.size()) != d)
      throw InvalidArgument("window dimension mismatch");
    for (int k = 0; k < d; ++k)
      if (!(window->hi[static_cast<std::size_t>(k)] > window->lo[static_cast<std::size_t>(k)]))
        throw InvalidArgument("window must be non-degenerate");
    rep.window = *window;
    rep.note = "offsets restricted to the window; no statement outside it";
  }

  const bool exact =
      periodic && mode == MeasureMode::exact_if_available && detail::boxes_disjoint(*periodic);
  rep.exact_measure = exact;

  const auto offset_coord = [&](int k, int i) {
    const auto ku = static_cast<std::size_t>(k);
    const double lo = rep.window.lo[ku];
    const double hi = rep.window.hi[ku];
    if (rep.periodic_window) return lo + (hi - lo) * i / offsets_per_axis;
    if (offsets_per_axis == 1) return lo;
    return lo + (hi - lo) * i / (offsets_per_axis - 1);
  };

  double sub_total = 1.0;
  for (int k = 0; k < d; ++k) sub_total *= resolution;

  double best = std::numeric_limits<double>::infinity();
  Point best_x = Point::Zero(d);
  detail::for_each_tensor_point(d, offsets_per_axis, offset_coord, [&](const Point& x) {
    double frac;
    if (exact) {
      frac = detail::exact_periodic_fraction(*periodic, x, a);
    } else {
      std::size_t hits = 0;
      detail::for_each_tensor_point(
          d, resolution,
          [&](int k, int i) {
            return x[k] + a[static_cast<std::size_t>(k)] * (i + 0.5) / resolution;
          },
          [&](const Point& y) { hits += s.contains(y) ? 1 : 0; });
      frac = static_cast<double>(hits) / sub_total;
    }
    if (frac < best) {
      best = frac;
      best_x = x;
    }
  });
  rep.gamma_estimate = std::clamp(best, 0.0, 1.0);
  rep.min_position = best_x;
  return rep;
}

inline double estimate_thickness(const RegionSet& s, std::span<const double> a,
                                 const std::optional<Window>& window, int resolution,
                                 int offsets_per_axis = 16) {
  return certify_thickness(s, a, window, resolution, offsets_per_axis).gamma_estimate;
}

//---------------------------------------------------------------------------//
// Equidistributed sets
//---------------------------------------------------------------------------//

/// True iff every ball B(z_j, delta) lies in its lattice cell G j + (0, G)^d.
inline bool verify_equidistributed(std::span<const LatticeBall> centers, double G, double delta) {
  if (!(G > 0.0)) throw InvalidArgument("G must be positive");
  if (!(delta > 0.0 && delta < G / 2)) throw InvalidArgument("delta must lie in (0, G/2)");
  for (const LatticeBall& b : centers) {
    if (b.index.size() != static_cast<std::size_t>(b.center.size()))
      throw InvalidArgument("lattice index and center dimension differ");
    for (Eigen::Index k = 0; k < b.center.size(); ++k) {
      const double lo = G * static_cast<double>(b.index[static_cast<std::size_t>(k)]);
      const double z = b.center[k];
      if (z - lo < delta || lo + G - z < delta) return false;
    }
  }
  return true;
}

/// (4G, delta) for a general sector reflection, (2G, delta) when theta == pi/4 exactly.
inline EquidistParams symmetrize_equidistributed(const EquidistParams& p, double theta) {
  p.validate();
  if (!(theta >= 0.0 && theta < std::numbers::pi / 2))
    throw InvalidArgument("sector angle must lie in [0, pi/2)");
  // pi/4 maps lattice cells onto lattice cells, so only one doubling is needed.
  if (theta == std::numbers::pi / 4)
    return EquidistParams(2.0 * p.G, p.delta, p.provenance + "|sector-pi/4");
  return EquidistParams(4.0 * p.G, p.delta, p.provenance + "|sector");
}

}  // namespace reflect
