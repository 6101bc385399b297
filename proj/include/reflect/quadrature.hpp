#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "reflect/errors.hpp"

namespace reflect {

enum class QuadratureRule { gauss_legendre, trapezoid };

inline const char* to_string(QuadratureRule r) {
  return r == QuadratureRule::gauss_legendre ? "gauss_legendre" : "trapezoid";
}

struct QuadratureSpec {
  int nodes = 32;
  QuadratureRule rule = QuadratureRule::gauss_legendre;
};

/// Nodes and weights on [0, T].
struct TimeGrid {
  Eigen::VectorXd times;
  Eigen::VectorXd weights;
  Eigen::Index size() const noexcept { return times.size(); }
};

/// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_m.
inline TimeGrid gauss_legendre_unit(int m) {
  TimeGrid g{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0;
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = m * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.times[i] = -x;
    g.times[m - 1 - i] = x;
    g.weights[i] = w;
    g.weights[m - 1 - i] = w;
  }
  return g;
}

inline TimeGrid make_time_grid(double T, const QuadratureSpec& q) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("time horizon must be positive");
  if (q.nodes < 2) throw InvalidArgument("quadrature needs at least 2 nodes");
  TimeGrid g;
  if (q.rule == QuadratureRule::gauss_legendre) {
    g = gauss_legendre_unit(q.nodes);
    g.times = (g.times.array() + 1.0) * (0.5 * T);
    g.weights *= 0.5 * T;
  } else {
    const int m = q.nodes;
    const double dt = T / (m - 1);
    g.times = Eigen::VectorXd::LinSpaced(m, 0.0, T);
    g.weights = Eigen::VectorXd::Constant(m, dt);
    g.weights[0] = g.weights[m - 1] = 0.5 * dt;
  }
  return g;
}

}  // namespace reflect
