#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reflect/errors.hpp"
#include "reflect/geometry.hpp"

namespace reflect {

/*!
 * Universal constants of the thick-set bound (K) and of the equidistributed
 * bound (D(d)). Neither is known numerically; the defaults of 1 are
 * placeholders and every result echoes the values used.
 */
struct UniversalConstants {
  double K = 1.0;
  std::map<int, double> D{{1, 1.0}, {2, 1.0}, {3, 1.0}};

  double D_of(int d) const {
    auto it = D.find(d);
    if (it == D.end()) throw InvalidArgument("no constant D(" + std::to_string(d) + ") configured");
    if (!(it->second > 0.0)) throw InvalidArgument("D(d) must be positive");
    return it->second;
  }

  /// R = max{D(2), D(3)} used for triangles and prisms.
  double R() const { return std::max(D_of(2), D_of(3)); }

  void validate() const {
    if (!(K > 0.0) || !std::isfinite(K)) throw InvalidArgument("K must be positive");
    for (const auto& [d, v] : D)
      if (!(v > 0.0)) throw InvalidArgument("D(" + std::to_string(d) + ") must be positive");
  }
};

struct PotentialNorms {
  double sup_norm = 0.0;      // ||V||_inf
  double neg_sup_norm = 0.0;  // ||V_-||_inf

  void validate() const {
    if (!(neg_sup_norm >= 0.0 && neg_sup_norm <= sup_norm) || !std::isfinite(sup_norm))
      throw InvalidArgument("potential norms must satisfy 0 <= ||V_-|| <= ||V||");
  }
};

struct BoundResult {
  double log_value = 0.0;
  double value = 0.0;  // +inf when overflow is set
  bool overflow = false;
  std::string formula_tag;
  std::vector<std::pair<std::string, double>> inputs;

  double input(const std::string& name) const {
    for (const auto& [k, v] : inputs)
      if (k == name) return v;
    throw InvalidArgument("no input named " + name);
  }
};

namespace detail {

inline BoundResult finish(double log_value, std::string tag,
                          std::vector<std::pair<std::string, double>> inputs) {
  BoundResult r;
  r.log_value = log_value;
  r.formula_tag = std::move(tag);
  r.inputs = std::move(inputs);
  if (log_value > std::log(std::numeric_limits<double>::max())) {
    r.value = std::numeric_limits<double>::infinity();
    r.overflow = true;
  } else {
    r.value = std::exp(log_value);
  }
  return r;
}

inline void push_vector(std::vector<std::pair<std::string, double>>& in, const std::string& name,
                        std::span<const double> v) {
  for (std::size_t j = 0; j < v.size(); ++j) in.emplace_back(name + std::to_string(j + 1), v[j]);
}

inline void check_time(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time horizon T must be positive");
}

/// ln(K^d / gamma); refuses the regime where it is negative.
inline double log_ratio(double K, int d, double gamma) {
  const double l = d * std::log(K) - std::log(gamma);
  if (l < 0.0)
    throw DomainError("ln(K^d/gamma) < 0: bound undefined for this K, d, gamma");
  return l;
}

inline void check_thick_inputs(double gamma, std::span<const double> a, double T, int d,
                               const UniversalConstants& c) {
  c.validate();
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (static_cast<int>(a.size()) != d) throw InvalidArgument("a must have d components");
  ThicknessParams(gamma, std::vector<double>(a.begin(), a.end()));
  check_time(T);
}

inline double l1(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

/// -1/2 ln T + (Kd/2) L + K ||a||_1^2 L^2 / (2T),  L = ln(K^d/gamma).
inline double thick_log(double gamma, std::span<const double> a, double T, int d, double K) {
  const double L = log_ratio(K, d, gamma);
  const double s = l1(a);
  return -0.5 * std::log(T) + 0.5 * K * d * L + K * s * s * L * L / (2.0 * T);
}

inline std::vector<std::pair<std::string, double>> thick_inputs(double gamma,
                                                                 std::span<const double> a,
                                                                 double T, int d, double K) {
  std::vector<std::pair<std::string, double>> in{{"gamma", gamma}};
  push_vector(in, "a", a);
  in.emplace_back("T", T);
  in.emplace_back("d", d);
  in.emplace_back("K", K);
  return in;
}

}  // namespace detail

/// Thick-set bound on R^d and on cubes.
inline BoundResult cost_bound_thick(double gamma, std::span<const double> a, double T, int d,
                                    const UniversalConstants& c = {}) {
  detail::check_thick_inputs(gamma, a, T, d, c);
  return detail::finish(detail::thick_log(gamma, a, T, d, c.K), "thick",
                        detail::thick_inputs(gamma, a, T, d, c.K));
}

enum class DomainKind { halfspace, orthant, sector, triangle, prism };

inline const char* to_string(DomainKind k) {
  switch (k) {
    case DomainKind::halfspace: return "halfspace";
    case DomainKind::orthant: return "orthant";
    case DomainKind::sector: return "sector";
    case DomainKind::triangle: return "triangle";
    case DomainKind::prism: return "prism";
  }
  return "?";
}

struct DomainSpec {
  DomainKind kind = DomainKind::halfspace;
  int n = 2;  // sector of angle pi / 2^n
  /// Side length of the triangle / prism. When set, the scale constraints
  /// 2 sqrt(a1^2 + a2^2) <= L and a_j <= L are checked.
  std::optional<double> L;
};

/*!
 * Bound for the reflected domains. Each case evaluates the full-space
 * (resp. orthant) bound at the parameters of the corresponding
 * symmetrized set:
 *   halfspace  thick(gamma/2, (2a_1, a_2, ...))
 *   orthant    thick(gamma/2^d, 2a)
 *   sector n   orthant at the sector parameters iterated n-2 times
 *   triangle   thick at the sector parameters, d = 2
 *   prism      thick at the sector parameters, d = 3
 */
inline BoundResult cost_bound_domain(const DomainSpec& dom, double gamma,
                                     std::span<const double> a, double T,
                                     const UniversalConstants& c = {}) {
  const int d = static_cast<int>(a.size());
  detail::check_thick_inputs(gamma, a, T, d, c);
  const ThicknessParams given(gamma, std::vector<double>(a.begin(), a.end()));

  auto inputs = detail::thick_inputs(gamma, a, T, d, c.K);
  const std::string tag = to_string(dom.kind);

  switch (dom.kind) {
    case DomainKind::halfspace: {
      const ThicknessParams p = halfspace_params(given);
      return detail::finish(detail::thick_log(p.gamma, p.a, T, d, c.K), tag, std::move(inputs));
    }
    case DomainKind::orthant: {
      const ThicknessParams p = orthant_params(given);
      return detail::finish(detail::thick_log(p.gamma, p.a, T, d, c.K), tag, std::move(inputs));
    }
    case DomainKind::sector: {
      if (d != 2) throw InvalidArgument("sector bound is planar (d = 2)");
      if (dom.n < 2) throw InvalidArgument("sector index n must be >= 2");
      const ThicknessParams p = orthant_params(iterate_sector_symmetrization(sector_params(given), dom.n));
      inputs.emplace_back("n", dom.n);
      return detail::finish(detail::thick_log(p.gamma, p.a, T, d, c.K), tag, std::move(inputs));
    }
    case DomainKind::triangle:
    case DomainKind::prism: {
      const int want = dom.kind == DomainKind::triangle ? 2 : 3;
      if (d != want)
        throw InvalidArgument(tag + " bound needs d = " + std::to_string(want));
      if (dom.L) {
        const double L = *dom.L;
        if (2.0 * std::hypot(a[0], a[1]) > L)
          throw InvalidArgument("scale constraint 2 sqrt(a1^2+a2^2) <= L violated");
        for (int j = 2; j < d; ++j)
          if (a[static_cast<std::size_t>(j)] > L) throw InvalidArgument("scale constraint a_j <= L violated");
        inputs.emplace_back("L", L);
      }
      inputs.emplace_back("scale_asserted", dom.L ? 1.0 : 0.0);
      const ThicknessParams p = sector_params(given);
      return detail::finish(detail::thick_log(p.gamma, p.a, T, d, c.K), tag, std::move(inputs));
    }
  }
  throw InvalidArgument("unknown domain kind");
}

/// Thick-set bound for (-Delta)^theta, theta > 1/2, with the Gaussian exponent replaced.
inline BoundResult cost_bound_fractional(double gamma, std::span<const double> a, double T, int d,
                                         double theta, const UniversalConstants& c = {}) {
  if (!(theta > 0.5) || !std::isfinite(theta)) throw InvalidArgument("theta must exceed 1/2");
  detail::check_thick_inputs(gamma, a, T, d, c);
  const double L = detail::log_ratio(c.K, d, gamma);
  const double base = detail::l1(a) * L;
  const double p = 2.0 * theta / (2.0 * theta - 1.0);
  const double q = 1.0 / (2.0 * theta - 1.0);
  const double lv = -0.5 * std::log(T) + 0.5 * c.K * d * L +
                    c.K * std::pow(base, p) / (2.0 * std::pow(T, q));
  auto inputs = detail::thick_inputs(gamma, a, T, d, c.K);
  inputs.emplace_back("theta", theta);
  return detail::finish(lv, "fractional", std::move(inputs));
}

namespace detail {

inline double equidist_log(double G, double delta, double T, const PotentialNorms& v, double D) {
  const double r = std::log(delta / G);
  return -D * (1.0 + std::pow(G, 4.0 / 3.0) * std::pow(v.sup_norm, 2.0 / 3.0)) * r + std::log(D) -
         0.5 * std::log(T) + D * G * G * r * r / (2.0 * T) + v.neg_sup_norm * T;
}

inline void check_equidist(double G, double delta, double T, const PotentialNorms& v) {
  EquidistParams(G, delta);
  check_time(T);
  v.validate();
}

}  // namespace detail

/// Equidistributed-set bound with potential V on boxes containing a G-cell.
inline BoundResult cost_bound_equidistributed(double G, double delta, double T,
                                              const PotentialNorms& norms, int d,
                                              const UniversalConstants& c = {}) {
  c.validate();
  detail::check_equidist(G, delta, T, norms);
  const double D = c.D_of(d);
  return detail::finish(detail::equidist_log(G, delta, T, norms, D), "equidistributed",
                        {{"G", G},
                         {"delta", delta},
                         {"T", T},
                         {"V_sup", norms.sup_norm},
                         {"V_neg", norms.neg_sup_norm},
                         {"d", d},
                         {"D", D}});
}

/*!
 * Equidistributed bound on sectors (scale 4^{n-1} G, constant D(2)) and on
 * triangles / prisms (scale 2G, constant R). The caller asserts L >= 2G for
 * the bounded domains; pass L to have it checked.
 */
inline BoundResult cost_bound_equidistributed_domain(const DomainSpec& dom, double G, double delta,
                                                     double T, const PotentialNorms& norms,
                                                     const UniversalConstants& c = {}) {
  c.validate();
  detail::check_equidist(G, delta, T, norms);
  double scale = 0.0;
  double D = 0.0;
  std::vector<std::pair<std::string, double>> inputs{
      {"G", G}, {"delta", delta}, {"T", T}, {"V_sup", norms.sup_norm}, {"V_neg", norms.neg_sup_norm}};
  switch (dom.kind) {
    case DomainKind::sector:
      if (dom.n < 2) throw InvalidArgument("sector index n must be >= 2");
      scale = std::pow(4.0, dom.n - 1) * G;
      D = c.D_of(2);
      inputs.emplace_back("n", dom.n);
      break;
    case DomainKind::triangle:
    case DomainKind::prism:
      if (dom.L && *dom.L < 2.0 * G) throw InvalidArgument("scale constraint L >= 2G violated");
      scale = 2.0 * G;
      D = c.R();
      if (dom.L) inputs.emplace_back("L", *dom.L);
      break;
    default:
      throw InvalidArgument("equidistributed domain bound supports sector, triangle, prism");
  }
  inputs.emplace_back("G_eff", scale);
  inputs.emplace_back("D", D);
  return detail::finish(detail::equidist_log(scale, delta, T, norms, D),
                        std::string("equidistributed-") + to_string(dom.kind), std::move(inputs));
}

}  // namespace reflect
