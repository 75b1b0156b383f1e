#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace xhaul::convex {

using Cmat = Eigen::MatrixXcd;

/// ln|I + A| for Hermitian A with I + A positive definite.
/// Throws std::runtime_error when the shifted matrix is not PD.
double logdet_identity_plus(const Cmat& a);

/// ln|X| for Hermitian positive definite X.
double logdet_psd(const Cmat& x);

/// Tangent (first-order) expansion of the concave ln|X| at X0:
/// L(X) = ln|X0| + Re tr(X0^{-1} (X - X0)) >= ln|X| for all X > 0,
/// with equality at X0.
struct LogDetTangent {
  double value_at_ref = 0.0;  // ln|X0|
  Cmat grad;                  // X0^{-1} (Hermitian)
  double offset = 0.0;        // ln|X0| - Re tr(X0^{-1} X0)
  double operator()(const Cmat& x) const;
};

LogDetTangent linearize_logdet(const Cmat& x0);

/// Nearest Hermitian matrix with eigenvalues >= eig_floor (Frobenius
/// projection when eig_floor = 0).
Cmat psd_project(const Cmat& x, double eig_floor = 0.0);

/// Projection onto {X Hermitian, eig(X) >= eig_floor, tr(X) <= trace_cap}.
Cmat psd_project_capped(const Cmat& x, double eig_floor, double trace_cap);

/// One Hermitian PSD variable block of an inner subproblem. 1x1 blocks
/// double as box-constrained nonnegative scalars.
struct BlockSpec {
  int dim = 1;
  double trace_cap = 0.0;  // <= 0 means unbounded
  double eig_floor = 0.0;
};

/// Convexified subproblem: maximize a concave objective over PSD blocks
/// subject to concave constraints g_j(x) >= 0. Objective and constraints
/// are evaluated jointly so implementations can share intermediate
/// factorizations across users and links.
struct InnerProblem {
  std::vector<BlockSpec> blocks;
  int num_constraints = 0;
  /// Returns the objective; writes g_j(x) into `constraints` (size
  /// num_constraints, pre-allocated by the solver).
  std::function<double(const std::vector<Cmat>& x, std::vector<double>& constraints)>
      eval;
  /// Accumulates d(objective)/dX_b + sum_j weight[j] * d g_j / dX_b into
  /// `out` (same block shapes as x, zero-initialized by the solver).
  std::function<void(const std::vector<Cmat>& x, const std::vector<double>& weight,
                     std::vector<Cmat>& out)>
      grad;
};

struct InnerOptions {
  double tol = 1e-6;          // projected-gradient stationarity target
  int max_iters = 2000;
  double penalty_init = 10.0; // exact-penalty weight, grown x10 per round
  int penalty_rounds = 5;
  double feas_tol = 1e-7;     // acceptable constraint violation
  double stall_tol = 1e-9;    // relative progress below which we stop
  int stall_window = 12;
  /// Optional per-accepted-step record of the penalized objective.
  std::vector<double>* step_trace = nullptr;
};

struct InnerSolution {
  std::vector<Cmat> blocks;
  double objective = 0.0;      // unpenalized objective at the returned point
  double max_violation = 0.0;  // max_j max(0, -g_j)
  bool converged = false;
  int iterations = 0;
};

/// Projected gradient ascent with backtracking line search on an
/// exact-penalty objective (hinge smoothed in a narrow band so BB steps
/// stay effective); the penalty weight grows geometrically until the
/// constraints hold. Feasible starts never regress: the best iterate is
/// tracked and returned.
InnerSolution solve_inner(const InnerProblem& problem, std::vector<Cmat> x0,
                          const InnerOptions& opts = {});

}  // namespace xhaul::convex
