#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reflect/discretize.hpp"
#include "reflect/errors.hpp"
#include "reflect/spectral.hpp"

namespace reflect {

/*!
 * Finite-dimensional control system  u' + H u = B v.
 *
 * The eigendecomposition of H is computed on first use and shared between
 * copies.
 */
class AbstractSystem {
 public:
  AbstractSystem() = default;

  AbstractSystem(Eigen::MatrixXd H, Eigen::MatrixXd B)
      : H_(std::move(H)), B_(std::move(B)), cache_(std::make_shared<Cache>()) {
    if (H_.rows() != H_.cols()) throw InvalidArgument("H must be square");
    if (B_.rows() != H_.rows()) throw InvalidArgument("B must have as many rows as H");
  }

  static AbstractSystem from_discrete(const DiscreteSystem& s) {
    return AbstractSystem(Eigen::MatrixXd(s.H), Eigen::MatrixXd(s.B()));
  }

  const Eigen::MatrixXd& H() const noexcept { return H_; }
  const Eigen::MatrixXd& B() const noexcept { return B_; }
  Eigen::Index space_dim() const noexcept { return H_.rows(); }
  Eigen::Index control_dim() const noexcept { return B_.cols(); }

  const SymmetricSpectrum& spectrum() const {
    if (!cache_) throw InvalidArgument("empty system");
    std::call_once(cache_->once, [this] { cache_->spectrum = SymmetricSpectrum(H_); });
    return cache_->spectrum;
  }

 private:
  struct Cache {
    std::once_flag once;
    SymmetricSpectrum spectrum;
  };
  Eigen::MatrixXd H_;
  Eigen::MatrixXd B_;
  std::shared_ptr<Cache> cache_;
};

/// Largest singular value by power iteration on M^T M.
inline double operator_norm(const Eigen::MatrixXd& m, int iterations = 500) {
  if (m.size() == 0) return 0.0;
  // Irrational-stride start vector; avoids landing in a symmetry kernel.
  Eigen::VectorXd x(m.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double frac = static_cast<double>(i + 1) * 0.7548776662466927;
    x[i] = 0.1 + (frac - std::floor(frac));
  }
  x.normalize();
  double sigma = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd y = m.transpose() * (m * x);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    const double next = std::sqrt(n);
    x = y / n;
    if (std::abs(next - sigma) <= 1e-15 * next) return next;
    sigma = next;
  }
  return sigma;
}

/// Y (big -> small), right inverse Yhat, control map Z.
struct IntertwinerTriple {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd Yhat;
  Eigen::MatrixXd Z;
  double yhat_norm = 0.0;
  double z_norm = 0.0;

  static IntertwinerTriple make(Eigen::MatrixXd Y, Eigen::MatrixXd Yhat, Eigen::MatrixXd Z) {
    if (Y.cols() != Yhat.rows() || Y.rows() != Yhat.cols())
      throw InvalidArgument("Y and Yhat shapes are incompatible");
    const Eigen::MatrixXd prod = Y * Yhat;
    const double err = (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-12) throw InvalidArgument("Yhat is not a right inverse of Y");
    IntertwinerTriple t{std::move(Y), std::move(Yhat), std::move(Z), 0.0, 0.0};
    t.yhat_norm = operator_norm(t.Yhat);
    t.z_norm = operator_norm(t.Z);
    return t;
  }

  /// Y = Z = Xstar, Yhat = X / 2, so that ||Yhat|| ||Z|| = 1.
  static IntertwinerTriple from_reflection(const ReflectionOperators& ops) {
    Eigen::MatrixXd xs(ops.Xstar);
    Eigen::MatrixXd x(ops.X);
    return make(xs, 0.5 * x, xs);
  }
};

struct DefectReport {
  std::string relation;
  double defect = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

namespace detail {

inline DefectReport report(std::string relation, double defect, double threshold) {
  return {std::move(relation), defect, threshold, defect <= threshold};
}

inline double max_norm(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline void check_shapes(const IntertwinerTriple& t, const AbstractSystem& big,
                         const AbstractSystem& small) {
  if (t.Y.rows() != small.space_dim() || t.Y.cols() != big.space_dim())
    throw InvalidArgument("Y shape does not map big space to small space");
  if (t.Z.rows() != small.control_dim() || t.Z.cols() != big.control_dim())
    throw InvalidArgument("Z shape does not map big controls to small controls");
}

}  // namespace detail

/// max |Y H~ - H Y|, threshold 1e-12 max(||H~||, ||H||).
inline DefectReport check_generator_intertwining(const IntertwinerTriple& t, const AbstractSystem& big,
                                                 const AbstractSystem& small) {
  detail::check_shapes(t, big, small);
  const double defect = detail::max_norm(t.Y * big.H() - small.H() * t.Y);
  const double scale = std::max(detail::max_norm(big.H()), detail::max_norm(small.H()));
  return detail::report("Y H~ = H Y", defect, 1e-12 * std::max(scale, 1.0));
}

/// max |Y B~ - B Z|.
inline DefectReport check_control_intertwining(const IntertwinerTriple& t, const AbstractSystem& big,
                                               const AbstractSystem& small) {
  detail::check_shapes(t, big, small);
  const double defect = detail::max_norm(t.Y * big.B() - small.B() * t.Z);
  const double scale = std::max(detail::max_norm(big.B()), detail::max_norm(small.B()));
  return detail::report("Y B~ = B Z", defect, 1e-12 * std::max(scale, 1.0));
}

/// max over t of |Y exp(-t H~) - exp(-t H) Y|, threshold 1e-10 ||Y||_max.
inline DefectReport check_semigroup_commutation(const IntertwinerTriple& t, const AbstractSystem& big,
                                                const AbstractSystem& small,
                                                std::span<const double> times) {
  detail::check_shapes(t, big, small);
  double defect = 0.0;
  for (double s : times) {
    if (!std::isfinite(s) || s < 0.0) throw InvalidArgument("times must be finite and >= 0");
    const Eigen::MatrixXd lhs = t.Y * big.spectrum().semigroup(s);
    const Eigen::MatrixXd rhs = small.spectrum().semigroup(s) * t.Y;
    defect = std::max(defect, detail::max_norm(lhs - rhs));
  }
  return detail::report("Y S~(t) = S(t) Y", defect, 1e-10 * std::max(detail::max_norm(t.Y), 1.0));
}

struct SpectralReport {
  DefectReport function;    // Y phi(H~) vs phi(H) Y
  DefectReport projectors;  // Y E~(lambda) vs E(lambda) Y over the lambda grid
  std::size_t lambdas_checked = 0;
  std::size_t lambdas_skipped = 0;
  bool pass() const { return function.pass && projectors.pass; }
};

/*!
 * Functional-calculus intertwining for symmetric H~, H. Spectral projectors
 * 1_{(-inf, lambda]} are compared at every grid lambda farther than 1e-8 from
 * both spectra.
 */
inline SpectralReport spectral_intertwining(const IntertwinerTriple& t, const AbstractSystem& big,
                                            const AbstractSystem& small,
                                            const std::function<double(double)>& phi,
                                            std::span<const double> lambda_grid) {
  detail::check_shapes(t, big, small);
  const SymmetricSpectrum& sb = big.spectrum();
  const SymmetricSpectrum& ss = small.spectrum();
  SpectralReport rep;
  const Eigen::MatrixXd lhs = t.Y * sb.apply(phi);
  const Eigen::MatrixXd rhs = ss.apply(phi) * t.Y;
  rep.function = detail::report("Y phi(H~) = phi(H) Y", detail::max_norm(lhs - rhs), 1e-10);

  double proj = 0.0;
  for (double lam : lambda_grid) {
    const auto near = [lam](const Eigen::VectorXd& ev) {
      return (ev.array() - lam).abs().minCoeff() < 1e-8;
    };
    if (near(sb.eigenvalues()) || near(ss.eigenvalues())) {
      ++rep.lambdas_skipped;
      continue;
    }
    ++rep.lambdas_checked;
    const auto indicator = [lam](double s) { return s <= lam ? 1.0 : 0.0; };
    proj = std::max(proj, detail::max_norm(t.Y * sb.apply(indicator) - ss.apply(indicator) * t.Y));
  }
  rep.projectors = detail::report("Y E~(lambda) = E(lambda) Y", proj, 1e-10);
  return rep;
}

/// max |Y Yhat u - u| over the columns of U.
inline double right_inverse_roundtrip(const IntertwinerTriple& t, const Eigen::MatrixXd& U) {
  return detail::max_norm(t.Y * (t.Yhat * U) - U);
}

}  // namespace reflect
