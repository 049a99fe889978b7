#include "qpemu/reference_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qpemu {

SolveConfig SolveConfig::defaults(const QpInstance& inst) {
  SolveConfig cfg;
  cfg.x0 = VectorXd::Zero(inst.n());
  if (inst.variant() == Variant::LinearlyConstrained)
    cfg.lam0 = VectorXd::Zero(inst.m());
  return cfg;
}

VectorXd gd_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x) {
  if (inst.variant() != Variant::Unconstrained)
    throw std::invalid_argument("gd_step: variant must be U");
  if (x.size() != inst.n()) throw std::invalid_argument("gd_step: x has wrong dimension");
  return x - steps.gamma * (inst.a_matrix() * x + inst.b_vec());
}

std::pair<VectorXd, VectorXd> arrow_hurwicz_step(const QpInstance& inst, const StepSizes& steps,
                                                 const VectorXd& x, const VectorXd& lam) {
  if (inst.variant() != Variant::LinearlyConstrained)
    throw std::invalid_argument("arrow_hurwicz_step: variant must be LC");
  if (x.size() != inst.n() || lam.size() != inst.m())
    throw std::invalid_argument("arrow_hurwicz_step: dimension mismatch");
  VectorXd x_next =
      x - steps.gamma * (inst.a_matrix() * x + inst.b_vec() + inst.c_matrix().transpose() * lam);
  VectorXd lam_next =
      (lam + steps.eta * (inst.c_matrix() * x_next - inst.d_vec())).cwiseMax(0.0);
  return {std::move(x_next), std::move(lam_next)};
}

VectorXd soft_threshold(const VectorXd& y, double theta) {
  if (theta < 0.0) throw std::invalid_argument("soft_threshold: theta must be >= 0");
  VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y[i];
    if (v > theta)
      out[i] = v - theta;
    else if (v < -theta)
      out[i] = v + theta;
    else
      out[i] = 0.0;
  }
  return out;
}

VectorXd ista_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x) {
  if (inst.variant() != Variant::L1Regularized)
    throw std::invalid_argument("ista_step: variant must be R");
  if (x.size() != inst.n()) throw std::invalid_argument("ista_step: x has wrong dimension");
  VectorXd y = x - steps.gamma * (inst.a_matrix() * x + inst.b_vec());
  return soft_threshold(y, steps.gamma * inst.l1_weight());
}

VectorXd project_l1_ball_sort(const VectorXd& y, double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("project_l1_ball_sort: budget must be > 0");
  if (y.cwiseAbs().sum() <= budget) return y;

  // Sort |y| descending and pick the largest prefix whose threshold keeps
  // every prefix entry active. Value-based, so ties are harmless.
  std::vector<double> u(y.data(), y.data() + y.size());
  for (double& v : u) v = std::abs(v);
  std::sort(u.begin(), u.end(), std::greater<double>());

  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - budget) / static_cast<double>(k + 1);
    if (u[k] > candidate)
      theta = candidate;
    else
      break;
  }
  return soft_threshold(y, std::max(theta, 0.0));
}

VectorXd pgd_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x) {
  if (inst.variant() != Variant::L1Constrained)
    throw std::invalid_argument("pgd_step: variant must be C");
  if (x.size() != inst.n()) throw std::invalid_argument("pgd_step: x has wrong dimension");
  VectorXd y = x - steps.gamma * (inst.a_matrix() * x + inst.b_vec());
  return project_l1_ball_sort(y, inst.l1_budget());
}

SolverTrace run(const QpInstance& inst, const StepSizes& steps, const SolveConfig& cfg) {
  steps.validate(inst);
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("run: tol must be positive");
  if (cfg.x0.size() != inst.n()) throw std::invalid_argument("run: x0 has wrong dimension");
  const bool is_lc = inst.variant() == Variant::LinearlyConstrained;
  if (is_lc) {
    if (!cfg.lam0 || cfg.lam0->size() != inst.m())
      throw std::invalid_argument("run: LC requires lam0 of length m");
    if ((cfg.lam0->array() < 0.0).any())
      throw std::invalid_argument("run: lam0 must be elementwise nonnegative");
  } else if (cfg.lam0) {
    throw std::invalid_argument("run: lam0 only allowed for variant LC");
  }

  SolverTrace trace;
  if (is_lc) trace.duals.emplace();

  VectorXd x = cfg.x0;
  VectorXd lam = is_lc ? *cfg.lam0 : VectorXd();

  auto record = [&](const VectorXd& xi, const VectorXd& li, double obj, double res) {
    if (!cfg.record_trace) {
      trace.iterates.clear();
      trace.objectives.clear();
      trace.residuals.clear();
      if (trace.duals) trace.duals->clear();
    }
    trace.iterates.push_back(xi);
    trace.objectives.push_back(obj);
    trace.residuals.push_back(res);
    if (trace.duals) trace.duals->push_back(li);
  };

  for (std::size_t k = 0;; ++k) {
    const double res =
        evaluate_residual(inst, x, is_lc ? std::optional<VectorXd>(lam) : std::nullopt);
    if (!std::isfinite(res)) throw std::runtime_error("run: residual diverged to NaN/Inf");
    record(x, lam, evaluate_objective(inst, x), res);
    trace.iterations = k;
    if (res <= cfg.tol) {
      trace.converged = true;
      break;
    }
    if (k >= cfg.max_iters) break;

    switch (inst.variant()) {
      case Variant::Unconstrained:
        x = gd_step(inst, steps, x);
        break;
      case Variant::L1Regularized:
        x = ista_step(inst, steps, x);
        break;
      case Variant::L1Constrained:
        x = pgd_step(inst, steps, x);
        break;
      case Variant::LinearlyConstrained: {
        auto [xn, ln] = arrow_hurwicz_step(inst, steps, x, lam);
        x = std::move(xn);
        lam = std::move(ln);
        break;
      }
    }
  }
  return trace;
}

}  // namespace qpemu
