#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reflect/discretize.hpp"
#include "reflect/errors.hpp"
#include "reflect/parallel.hpp"
#include "reflect/quadrature.hpp"
#include "reflect/transfer.hpp"

namespace reflect {

/// exp(-t H) u0.
inline Eigen::VectorXd propagate(const AbstractSystem& system, const Eigen::VectorXd& u0, double t) {
  if (!std::isfinite(t) || t < 0.0) throw InvalidArgument("propagation time must be finite and >= 0");
  if (u0.size() != system.space_dim()) throw InvalidArgument("state has the wrong dimension");
  return system.spectrum().propagate(u0, t);
}

namespace detail {

/// Gramian in the eigenbasis of H: (W W^T) o K with W = Q^T B and
/// K_ij = sum_n w_n exp(-(T - s_n)(mu_i + mu_j)). Bitwise symmetric.
inline Eigen::MatrixXd eigen_gramian(const SymmetricSpectrum& sp, const Eigen::MatrixXd& W,
                                     double T, const TimeGrid& tg) {
  const Eigen::VectorXd& mu = sp.eigenvalues();
  const Eigen::Index n = mu.size();
  Eigen::MatrixXd C = W * W.transpose();
  Eigen::MatrixXd E(n, tg.size());
  for (Eigen::Index k = 0; k < tg.size(); ++k)
    E.col(k) = (-(T - tg.times[k]) * mu.array()).exp() * std::sqrt(tg.weights[k]);
  Eigen::MatrixXd K = E * E.transpose();
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = 0.5 * (C(i, j) + C(j, i)) * 0.5 * (K(i, j) + K(j, i));
      G(i, j) = v;
      G(j, i) = v;
    }
  return G;
}

}  // namespace detail

/// Lambda_T = int_0^T S(T-s) B B^T S(T-s) ds by the given rule.
inline Eigen::MatrixXd gramian(const AbstractSystem& system, double T, const QuadratureSpec& quad) {
  const TimeGrid tg = make_time_grid(T, quad);
  const SymmetricSpectrum& sp = system.spectrum();
  const Eigen::MatrixXd& Q = sp.eigenvectors();
  const Eigen::MatrixXd G = detail::eigen_gramian(sp, Q.transpose() * system.B(), T, tg);
  const Eigen::MatrixXd L = Q * G * Q.transpose();
  return 0.5 * (L + L.transpose());
}

struct ControlProblem {
  AbstractSystem system;
  double T = 1.0;
  Eigen::VectorXd u0;
  QuadratureSpec quadrature;
  std::optional<double> epsilon;  // default 1e-12 trace(Lambda) / n
};

struct ControlSolve {
  Eigen::VectorXd times;
  Eigen::VectorXd weights;
  Eigen::MatrixXd v_trajectory;  // column k = control at times[k]
  double control_norm = 0.0;
  double terminal_residual = 0.0;
  double gramian_condition = 0.0;
  double per_datum_cost = 0.0;
  double epsilon = 0.0;
  Eigen::VectorXd terminal_state;
};

/// L2((0,T)) norm of a node-valued trajectory under the rule's weights.
inline double trajectory_norm(const Eigen::MatrixXd& v, const Eigen::VectorXd& weights) {
  if (v.cols() != weights.size()) throw InvalidArgument("trajectory and weights disagree in length");
  double s = 0.0;
  for (Eigen::Index k = 0; k < v.cols(); ++k) s += weights[k] * v.col(k).squaredNorm();
  return std::sqrt(s);
}

/// u(T) = S(T) u0 + sum_n w_n S(T - s_n) B v_n.
inline Eigen::VectorXd mild_terminal_state(const AbstractSystem& system, const Eigen::VectorXd& u0,
                                           const Eigen::MatrixXd& v, double T, const TimeGrid& tg) {
  if (u0.size() != system.space_dim()) throw InvalidArgument("state has the wrong dimension");
  if (v.rows() != system.control_dim() || v.cols() != tg.size())
    throw InvalidArgument("control trajectory has the wrong shape");
  const SymmetricSpectrum& sp = system.spectrum();
  const Eigen::MatrixXd& Q = sp.eigenvectors();
  const Eigen::ArrayXd mu = sp.eigenvalues().array();
  Eigen::VectorXd c = ((Q.transpose() * u0).array() * (-T * mu).exp()).matrix();
  const Eigen::MatrixXd W = Q.transpose() * system.B();
  for (Eigen::Index k = 0; k < tg.size(); ++k)
    c.array() += tg.weights[k] * (-(T - tg.times[k]) * mu).exp() * (W * v.col(k)).array();
  return Q * c;
}

/*!
 * Minimal-norm null controls for a fixed (system, T, quadrature, epsilon).
 *
 * The Gramian and its eigendecomposition are computed once; solve() is const
 * and may be called concurrently.
 */
class HumSolver {
 public:
  HumSolver(AbstractSystem system, double T, QuadratureSpec quad, std::optional<double> epsilon = {})
      : system_(std::move(system)), T_(T), quad_(quad), grid_(make_time_grid(T, quad)) {
    if (epsilon && (!std::isfinite(*epsilon) || *epsilon < 0.0))
      throw InvalidArgument("regularization must be finite and >= 0");
    const SymmetricSpectrum& sp = system_.spectrum();
    W_ = sp.eigenvectors().transpose() * system_.B();
    G_ = detail::eigen_gramian(sp, W_, T_, grid_);
    const Eigen::Index n = G_.rows();
    eps_ = epsilon ? *epsilon : (n ? 1e-12 * G_.trace() / static_cast<double>(n) : 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G_);
    if (es.info() != Eigen::Success) throw NumericalFailure("Gramian eigensolver failed", 0.0);
    sigma_ = es.eigenvalues();
    V_ = es.eigenvectors();
    if (n == 0) return;
    const double top = std::max(sigma_.maxCoeff(), 0.0) + eps_;
    const double bottom = sigma_.minCoeff() + eps_;
    condition_ = bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
    if (!(bottom > std::numeric_limits<double>::epsilon() * std::max(sigma_.maxCoeff(), 0.0)) ||
        !(bottom > 0.0))
      throw NumericalFailure("regularized Gramian is singular (condition estimate " +
                                 std::to_string(condition_) + ")",
                             condition_);
  }

  const AbstractSystem& system() const noexcept { return system_; }
  const TimeGrid& time_grid() const noexcept { return grid_; }
  double T() const noexcept { return T_; }
  double epsilon() const noexcept { return eps_; }
  double gramian_condition() const noexcept { return condition_; }
  const Eigen::VectorXd& gramian_eigenvalues() const noexcept { return sigma_; }

  ControlSolve solve(const Eigen::VectorXd& u0) const {
    if (u0.size() != system_.space_dim()) throw InvalidArgument("initial state has the wrong dimension");
    const SymmetricSpectrum& sp = system_.spectrum();
    const Eigen::ArrayXd mu = sp.eigenvalues().array();
    const Eigen::VectorXd rhs = -((sp.eigenvectors().transpose() * u0).array() * (-T_ * mu).exp()).matrix();
    // p in the eigenbasis of H.
    const Eigen::VectorXd p = V_ * ((V_.transpose() * rhs).array() / (sigma_.array() + eps_)).matrix();

    ControlSolve out;
    out.times = grid_.times;
    out.weights = grid_.weights;
    out.epsilon = eps_;
    out.gramian_condition = condition_;
    out.v_trajectory.resize(system_.control_dim(), grid_.size());
    for (Eigen::Index k = 0; k < grid_.size(); ++k)
      out.v_trajectory.col(k) =
          W_.transpose() * ((-(T_ - grid_.times[k]) * mu).exp() * p.array()).matrix();
    out.control_norm = trajectory_norm(out.v_trajectory, grid_.weights);
    out.terminal_state = mild_terminal_state(system_, u0, out.v_trajectory, T_, grid_);
    out.terminal_residual = out.terminal_state.norm();
    const double u0n = u0.norm();
    out.per_datum_cost = u0n > 0.0 ? out.control_norm / u0n : 0.0;
    return out;
  }

  /// Largest singular value of u0 -> v, i.e. of diag(sqrt(s)/(s+eps)) V^T S(T) in eigen coordinates.
  double operator_cost() const {
    const Eigen::ArrayXd decay = (-T_ * system_.spectrum().eigenvalues().array()).exp();
    const Eigen::ArrayXd gain = sigma_.array().max(0.0).sqrt() / (sigma_.array() + eps_);
    const Eigen::MatrixXd M = gain.matrix().asDiagonal() * V_.transpose() * decay.matrix().asDiagonal();
    return operator_norm(M, 2000);
  }

 private:
  AbstractSystem system_;
  double T_;
  QuadratureSpec quad_;
  TimeGrid grid_;
  Eigen::MatrixXd W_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd V_;
  double eps_ = 0.0;
  double condition_ = 0.0;
};

inline ControlSolve hum_control(const ControlProblem& problem) {
  return HumSolver(problem.system, problem.T, problem.quadrature, problem.epsilon).solve(problem.u0);
}

/// Max per-datum cost over the supplied data (zero data are skipped).
inline double observed_cost(const AbstractSystem& system, double T, const QuadratureSpec& quad,
                            std::optional<double> epsilon, std::span<const Eigen::VectorXd> data) {
  const HumSolver solver(system, T, quad, epsilon);
  double worst = 0.0;
  for (const auto& u0 : data) worst = std::max(worst, solver.solve(u0).per_datum_cost);
  return worst;
}

/// Operator-norm surrogate for the sup over unit data of the regularized map.
inline double observed_cost_operator(const AbstractSystem& system, double T, const QuadratureSpec& quad,
                                     std::optional<double> epsilon) {
  return HumSolver(system, T, quad, epsilon).operator_cost();
}

//---------------------------------------------------------------------------//
// Transfer experiment
//---------------------------------------------------------------------------//

struct TransferDatum {
  std::size_t index = 0;
  double u0_norm = 0.0;
  double half_cost = 0.0;          // ||v|| / ||u0||
  double full_cost = 0.0;          // ||v~|| / ||u~0||
  double cost_margin = 0.0;        // full_cost + 1e-10 - half_cost
  double half_residual = 0.0;      // half system driven by v = Xstar v~
  double full_residual = 0.0;
  double residual_bound = 0.0;
  double residual_margin = 0.0;    // residual_bound - half_residual
  double direct_half_cost = 0.0;   // HUM on the half system itself
  double direct_half_residual = 0.0;
  bool pass = false;
  Eigen::MatrixXd v_trajectory;    // kept only on request
};

struct TransferOptions {
  int threads = 1;
  bool keep_trajectories = false;
  double cost_tolerance = 1e-10;
  double residual_factor = 10.0;
};

struct TransferReport {
  double T = 0.0;
  QuadratureSpec quadrature;
  Eigen::VectorXd times;
  Eigen::VectorXd weights;
  double generator_defect = 0.0;
  double generator_threshold = 0.0;
  bool control_commutation = false;
  double epsilon_full = 0.0;
  double epsilon_half = 0.0;
  double gramian_condition_full = 0.0;
  double gramian_condition_half = 0.0;
  double sampled_cost_half = 0.0;
  double sampled_cost_full = 0.0;
  std::vector<TransferDatum> data;
  bool all_pass() const {
    return std::all_of(data.begin(), data.end(), [](const TransferDatum& d) { return d.pass; });
  }
  double min_cost_margin() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& d : data) m = std::min(m, d.cost_margin);
    return m;
  }
};

/*!
 * Controls the half system through the full one: u~0 = X u0 / 2, v~ from HUM
 * on the full system, v = Xstar v~. Throws PreconditionViolation if the
 * generator or control intertwining fails.
 */
inline TransferReport transfer_experiment(const DiscreteSystem& half, const DiscreteSystem& full,
                                          const ReflectionOperators& ops, double T,
                                          std::span<const Eigen::VectorXd> data,
                                          const QuadratureSpec& quad, std::optional<double> epsilon = {},
                                          const TransferOptions& opt = {}) {
  TransferReport rep;
  rep.T = T;
  rep.quadrature = quad;
  rep.generator_defect = check_discrete_intertwining(ops, half.H, full.H);
  rep.generator_threshold = 1e-12 * std::max({max_abs(half.H), max_abs(full.H), 1.0});
  if (!(rep.generator_defect <= rep.generator_threshold))
    throw PreconditionViolation("Xstar H~ = H Xstar",
                                "generator intertwining defect " + std::to_string(rep.generator_defect) +
                                    " exceeds " + std::to_string(rep.generator_threshold));
  rep.control_commutation = check_control_commutation(ops, half.control, full.control);
  if (!rep.control_commutation)
    throw PreconditionViolation("Xstar chi~ = chi Xstar", "control sets are not mirror images");

  const AbstractSystem full_sys = AbstractSystem::from_discrete(full);
  const AbstractSystem half_sys = AbstractSystem::from_discrete(half);
  const HumSolver full_solver(full_sys, T, quad, epsilon);
  const HumSolver half_solver(half_sys, T, quad, epsilon);
  const TimeGrid& tg = full_solver.time_grid();
  rep.times = tg.times;
  rep.weights = tg.weights;
  rep.epsilon_full = full_solver.epsilon();
  rep.epsilon_half = half_solver.epsilon();
  rep.gramian_condition_full = full_solver.gramian_condition();
  rep.gramian_condition_half = half_solver.gramian_condition();

  const Eigen::MatrixXd X(ops.X);
  const Eigen::MatrixXd Xstar(ops.Xstar);
  rep.data.resize(data.size());
  parallel_for(data.size(), opt.threads, [&](std::size_t i) {
    const Eigen::VectorXd& u0 = data[i];
    if (u0.size() != half_sys.space_dim()) throw InvalidArgument("datum does not live on the half grid");
    TransferDatum& d = rep.data[i];
    d.index = i;
    d.u0_norm = u0.norm();
    const Eigen::VectorXd ut0 = 0.5 * (X * u0);
    const ControlSolve fs = full_solver.solve(ut0);
    const Eigen::MatrixXd v = Xstar * fs.v_trajectory;
    const double v_norm = trajectory_norm(v, tg.weights);
    d.full_cost = fs.per_datum_cost;
    d.half_cost = d.u0_norm > 0.0 ? v_norm / d.u0_norm : 0.0;
    d.cost_margin = d.full_cost + opt.cost_tolerance - d.half_cost;
    d.full_residual = fs.terminal_residual;
    d.half_residual = mild_terminal_state(half_sys, u0, v, T, tg).norm();
    d.residual_bound = opt.residual_factor * d.full_residual +
                       rep.generator_defect * (ut0.norm() + std::sqrt(T) * fs.control_norm);
    d.residual_margin = d.residual_bound - d.half_residual;
    const ControlSolve hs = half_solver.solve(u0);
    d.direct_half_cost = hs.per_datum_cost;
    d.direct_half_residual = hs.terminal_residual;
    d.pass = d.cost_margin >= 0.0 && d.residual_margin >= 0.0;
    if (opt.keep_trajectories) d.v_trajectory = v;
  });
  for (const auto& d : rep.data) {
    rep.sampled_cost_half = std::max(rep.sampled_cost_half, d.half_cost);
    rep.sampled_cost_full = std::max(rep.sampled_cost_full, d.full_cost);
  }
  return rep;
}

}  // namespace reflect
