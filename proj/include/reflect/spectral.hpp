#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "reflect/errors.hpp"

namespace reflect {

/// max |M - M^T| relative to max |M|.
inline double relative_asymmetry(const Eigen::MatrixXd& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

/*!
 * Eigendecomposition H = Q diag(mu) Q^T of a symmetric matrix, used as the
 * functional calculus phi(H) = Q diag(phi(mu)) Q^T.
 */
class SymmetricSpectrum {
 public:
  SymmetricSpectrum() = default;

  explicit SymmetricSpectrum(const Eigen::MatrixXd& H) {
    if (H.rows() != H.cols()) throw InvalidArgument("spectrum needs a square matrix");
    if (relative_asymmetry(H) > 1e-12) throw InvalidArgument("matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver failed", 0.0);
    values_ = es.eigenvalues();
    vectors_ = es.eigenvectors();
  }

  const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
  const Eigen::MatrixXd& eigenvectors() const noexcept { return vectors_; }
  Eigen::Index size() const noexcept { return values_.size(); }

  template <class Phi>
  Eigen::MatrixXd apply(Phi&& phi) const {
    Eigen::VectorXd d(values_.size());
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      d[i] = phi(values_[i]);
      if (!std::isfinite(d[i]))
        throw DomainError("function is not finite at eigenvalue " + std::to_string(values_[i]));
    }
    return vectors_ * d.asDiagonal() * vectors_.transpose();
  }

  /// exp(-t H); exactly the identity at t = 0.
  Eigen::MatrixXd semigroup(double t) const {
    if (t == 0.0) return Eigen::MatrixXd::Identity(size(), size());
    return apply([t](double mu) { return std::exp(-t * mu); });
  }

  Eigen::VectorXd propagate(const Eigen::VectorXd& u, double t) const {
    if (t == 0.0) return u;
    const Eigen::VectorXd c = vectors_.transpose() * u;
    return vectors_ * (c.array() * (-t * values_.array()).exp()).matrix();
  }

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXd vectors_;
};

/// s^theta on [0, inf), 0 below; the fractional power of a nonnegative operator.
inline auto fractional_power(double theta) {
  return [theta](double s) { return s > 0.0 ? std::pow(s, theta) : 0.0; };
}

}  // namespace reflect
