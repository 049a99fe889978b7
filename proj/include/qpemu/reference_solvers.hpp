#pragma once

#include "qpemu/qp_core.hpp"

namespace qpemu {

/// Run configuration shared by the classical solvers and the machines.
struct SolveConfig {
  std::size_t max_iters = 100000;
  double tol = 1e-8;
  VectorXd x0;
  std::optional<VectorXd> lam0;
  bool record_trace = true;

  /// x0 = 0 (and lam0 = 0 for LC), default tolerances.
  static SolveConfig defaults(const QpInstance& inst);
};

/// One gradient-descent step x - gamma (Ax + b). Variant U.
VectorXd gd_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x);

/// One Arrow-Hurwicz step. The dual update uses the already-updated primal:
///   x' = x - gamma (Ax + b + C'lam),  lam' = [lam + eta (Cx' - d)]_+.
std::pair<VectorXd, VectorXd> arrow_hurwicz_step(const QpInstance& inst, const StepSizes& steps,
                                                 const VectorXd& x, const VectorXd& lam);

/// Elementwise sign(y) * max(|y| - theta, 0).
VectorXd soft_threshold(const VectorXd& y, double theta);

/// One ISTA step S_{gamma*l1_weight}(x - gamma (Ax + b)). Variant R.
VectorXd ista_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x);

/// Exact Euclidean projection onto {|x|_1 <= budget} by sorting |y| and
/// solving the piecewise-linear threshold equation. Identity on the closed
/// ball (including the boundary). O(n log n).
VectorXd project_l1_ball_sort(const VectorXd& y, double budget);

/// One projected-gradient step onto the l1 ball. Variant C.
VectorXd pgd_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x);

/// Dispatches the per-variant step until the residual drops to cfg.tol or
/// cfg.max_iters steps have been taken. Step-size conditions are checked
/// before the first step. If cfg.record_trace is false the trace keeps only
/// the final entry.
SolverTrace run(const QpInstance& inst, const StepSizes& steps, const SolveConfig& cfg);

}  // namespace qpemu
