#include "qpemu/qp_core.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

#include "qpemu/reference_solvers.hpp"

namespace qpemu {

namespace {

constexpr double kSymmetryTol = 1e-12;

void check_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains NaN/Inf");
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Unconstrained: return "U";
    case Variant::LinearlyConstrained: return "LC";
    case Variant::L1Regularized: return "R";
    case Variant::L1Constrained: return "C";
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_from_string(std::string_view s) {
  if (s == "U") return Variant::Unconstrained;
  if (s == "LC") return Variant::LinearlyConstrained;
  if (s == "R") return Variant::L1Regularized;
  if (s == "C") return Variant::L1Constrained;
  throw std::invalid_argument("unknown variant \"" + std::string(s) + "\"");
}

double power_lipschitz(const MatrixXd& a_matrix) {
  if (a_matrix.rows() != a_matrix.cols() || a_matrix.rows() == 0)
    throw std::invalid_argument("power_lipschitz: matrix must be square and nonempty");
  check_finite(a_matrix, "power_lipschitz: matrix");

  const Eigen::Index n = a_matrix.rows();
  // Deterministic start: uniform bits from a fixed seed, no libm involved.
  std::mt19937_64 eng(0x9e3779b97f4a7c15ULL);
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v[i] = static_cast<double>(eng() >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
  v.normalize();

  constexpr std::size_t kMaxIters = 1000000;
  double lambda = 0.0;
  int stalled = 0;
  for (std::size_t it = 0; it < kMaxIters; ++it) {
    VectorXd w = a_matrix * v;
    const double prev = lambda;
    lambda = v.dot(w) / v.squaredNorm();
    const double scale = std::max(std::abs(lambda), 1e-300);
    if ((w - lambda * v).norm() <= 1e-11 * scale) return lambda;
    // A stalled Rayleigh quotient means the remaining eigens are too close
    // to separate; any value in the cluster is within tolerance.
    stalled = std::abs(lambda - prev) <= 1e-15 * scale ? stalled + 1 : 0;
    if (stalled >= 50) return lambda;
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = w / wn;
  }
  throw ConvergenceError("power_lipschitz: no convergence within iteration cap", lambda, 0.0);
}

double operator_norm(const MatrixXd& c_matrix) {
  if (c_matrix.size() == 0) return 0.0;
  MatrixXd gram = c_matrix.transpose() * c_matrix;
  gram = (0.5 * (gram + gram.transpose())).eval();
  const double lam = power_lipschitz(gram);
  return std::sqrt(std::max(lam, 0.0));
}

QpInstance::QpInstance(Variant v, MatrixXd a, VectorXd b, std::optional<MatrixXd> c,
                       std::optional<VectorXd> d, std::optional<double> l1w,
                       std::optional<double> l1b, std::optional<std::uint64_t> seed)
    : variant_(v),
      a_(std::move(a)),
      b_(std::move(b)),
      c_(c ? std::move(*c) : MatrixXd()),
      d_(d ? std::move(*d) : VectorXd()),
      l1_weight_(l1w),
      l1_budget_(l1b),
      seed_(seed) {
  validate_and_finalize();
}

QpInstance QpInstance::unconstrained(MatrixXd a, VectorXd b, std::optional<std::uint64_t> seed) {
  return QpInstance(Variant::Unconstrained, std::move(a), std::move(b), {}, {}, {}, {}, seed);
}

QpInstance QpInstance::linearly_constrained(MatrixXd a, VectorXd b, MatrixXd c, VectorXd d,
                                            std::optional<std::uint64_t> seed) {
  return QpInstance(Variant::LinearlyConstrained, std::move(a), std::move(b), std::move(c),
                    std::move(d), {}, {}, seed);
}

QpInstance QpInstance::l1_regularized(MatrixXd a, VectorXd b, double l1_weight,
                                      std::optional<std::uint64_t> seed) {
  return QpInstance(Variant::L1Regularized, std::move(a), std::move(b), {}, {}, l1_weight, {},
                    seed);
}

QpInstance QpInstance::l1_constrained(MatrixXd a, VectorXd b, double l1_budget,
                                      std::optional<std::uint64_t> seed) {
  return QpInstance(Variant::L1Constrained, std::move(a), std::move(b), {}, {}, {}, l1_budget,
                    seed);
}

void QpInstance::validate_and_finalize() {
  const Eigen::Index nn = b_.size();
  if (nn < 1) throw std::invalid_argument("QpInstance: n must be positive");
  if (a_.rows() != nn || a_.cols() != nn)
    throw std::invalid_argument("QpInstance: A must be n x n");
  check_finite(a_, "QpInstance: A");
  check_finite(b_, "QpInstance: b");

  const double asym = (a_ - a_.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol)
    throw std::invalid_argument("QpInstance: A is asymmetric beyond 1e-12");
  a_ = (0.5 * (a_ + a_.transpose())).eval();

  Eigen::LDLT<MatrixXd> ldlt(a_);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw std::invalid_argument("QpInstance: A is not positive definite");

  const bool is_lc = variant_ == Variant::LinearlyConstrained;
  if (is_lc) {
    if (c_.size() == 0 || d_.size() == 0)
      throw std::invalid_argument("QpInstance: LC requires C and d");
    if (c_.cols() != nn || c_.rows() != d_.size())
      throw std::invalid_argument("QpInstance: C must be m x n and d length m");
    if (d_.size() < 1) throw std::invalid_argument("QpInstance: LC requires m >= 1");
    check_finite(c_, "QpInstance: C");
    check_finite(d_, "QpInstance: d");
  } else if (c_.size() != 0 || d_.size() != 0) {
    throw std::invalid_argument("QpInstance: C/d only allowed for variant LC");
  }

  if (variant_ == Variant::L1Regularized) {
    if (!l1_weight_ || *l1_weight_ <= 0.0)
      throw std::invalid_argument("QpInstance: variant R requires positive l1_weight");
  } else if (l1_weight_) {
    throw std::invalid_argument("QpInstance: l1_weight only allowed for variant R");
  }
  if (variant_ == Variant::L1Constrained) {
    if (!l1_budget_ || *l1_budget_ <= 0.0)
      throw std::invalid_argument("QpInstance: variant C requires positive l1_budget");
  } else if (l1_budget_) {
    throw std::invalid_argument("QpInstance: l1_budget only allowed for variant C");
  }

  lipschitz_ = power_lipschitz(a_);
  if (is_lc) {
    c_opnorm_ = operator_norm(c_);
    certify_feasible();
  }
}

// Drives 1/2 |[Cx-d]_+|^2 down by gradient steps from x = 0; rejects the
// instance if the infinity-norm violation does not reach 1e-8 within
// 10,000 steps.
void QpInstance::certify_feasible() const {
  VectorXd x = VectorXd::Zero(n());
  const double smooth = c_opnorm_ * c_opnorm_;
  const double step = smooth > 0.0 ? 1.0 / smooth : 1.0;
  for (int it = 0; it < 10000; ++it) {
    VectorXd viol = (c_ * x - d_).cwiseMax(0.0);
    if (viol.size() == 0 || viol.maxCoeff() < 1e-8) return;
    x -= step * (c_.transpose() * viol);
  }
  throw std::invalid_argument("QpInstance: could not certify a feasible point for Cx <= d");
}

const MatrixXd& QpInstance::c_matrix() const {
  if (variant_ != Variant::LinearlyConstrained)
    throw std::invalid_argument("QpInstance: C only present for variant LC");
  return c_;
}

const VectorXd& QpInstance::d_vec() const {
  if (variant_ != Variant::LinearlyConstrained)
    throw std::invalid_argument("QpInstance: d only present for variant LC");
  return d_;
}

double QpInstance::l1_weight() const {
  if (!l1_weight_) throw std::invalid_argument("QpInstance: l1_weight only present for variant R");
  return *l1_weight_;
}

double QpInstance::l1_budget() const {
  if (!l1_budget_) throw std::invalid_argument("QpInstance: l1_budget only present for variant C");
  return *l1_budget_;
}

double QpInstance::c_opnorm() const {
  if (variant_ != Variant::LinearlyConstrained)
    throw std::invalid_argument("QpInstance: |C|_2 only present for variant LC");
  return c_opnorm_;
}

StepSizes StepSizes::defaults(const QpInstance& inst) {
  StepSizes s;
  s.lipschitz = inst.lipschitz();
  s.gamma = 1.0 / s.lipschitz;
  if (inst.variant() == Variant::LinearlyConstrained) {
    s.c_opnorm = inst.c_opnorm();
    const double cc = *s.c_opnorm * *s.c_opnorm;
    s.eta = cc > 0.0 ? 0.5 / (s.gamma * cc) : 1.0;
  } else {
    s.eta = 1.0 / static_cast<double>(inst.n());
  }
  return s;
}

void StepSizes::validate(const QpInstance& inst) const {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("StepSizes: lipschitz must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("StepSizes: gamma must be positive");
  if (!(eta > 0.0)) throw std::invalid_argument("StepSizes: eta must be positive");
  switch (inst.variant()) {
    case Variant::Unconstrained:
    case Variant::LinearlyConstrained:
      if (!(gamma < 2.0 / lipschitz))
        throw std::invalid_argument("step size violates 0 < gamma < 2/L");
      break;
    case Variant::L1Regularized:
    case Variant::L1Constrained:
      if (!(gamma <= 1.0 / lipschitz))
        throw std::invalid_argument("step size violates 0 < gamma <= 1/L");
      break;
  }
  if (inst.variant() == Variant::LinearlyConstrained) {
    if (!c_opnorm) throw std::invalid_argument("StepSizes: LC requires c_opnorm");
    if (!(eta * gamma * *c_opnorm * *c_opnorm < 1.0))
      throw std::invalid_argument("step size violates eta*gamma*|C|_2^2 < 1");
  }
  if (inst.variant() == Variant::L1Constrained) {
    if (!(eta <= 1.0 / static_cast<double>(inst.n())))
      throw std::invalid_argument("step size violates 0 < eta <= 1/n");
  }
}

double evaluate_objective(const QpInstance& inst, const VectorXd& x) {
  if (x.size() != inst.n())
    throw std::invalid_argument("evaluate_objective: x has wrong dimension");
  double val = 0.5 * x.dot(inst.a_matrix() * x) + inst.b_vec().dot(x);
  if (inst.variant() == Variant::L1Regularized)
    val += inst.l1_weight() * x.cwiseAbs().sum();
  return val;
}

double evaluate_residual(const QpInstance& inst, const VectorXd& x,
                         const std::optional<VectorXd>& lam) {
  if (x.size() != inst.n())
    throw std::invalid_argument("evaluate_residual: x has wrong dimension");
  const bool is_lc = inst.variant() == Variant::LinearlyConstrained;
  if (is_lc != lam.has_value())
    throw std::invalid_argument("evaluate_residual: lam present iff variant LC");

  switch (inst.variant()) {
    case Variant::Unconstrained:
      return (inst.a_matrix() * x + inst.b_vec()).cwiseAbs().maxCoeff();
    case Variant::L1Regularized: {
      const double g = 1.0 / inst.lipschitz();
      VectorXd y = x - g * (inst.a_matrix() * x + inst.b_vec());
      return (x - soft_threshold(y, g * inst.l1_weight())).cwiseAbs().maxCoeff();
    }
    case Variant::L1Constrained: {
      const double g = 1.0 / inst.lipschitz();
      VectorXd y = x - g * (inst.a_matrix() * x + inst.b_vec());
      return (x - project_l1_ball_sort(y, inst.l1_budget())).cwiseAbs().maxCoeff();
    }
    case Variant::LinearlyConstrained: {
      if (lam->size() != inst.m())
        throw std::invalid_argument("evaluate_residual: lam has wrong dimension");
      VectorXd stat = inst.a_matrix() * x + inst.b_vec() + inst.c_matrix().transpose() * *lam;
      VectorXd slack = inst.c_matrix() * x - inst.d_vec();
      const double r_stat = stat.cwiseAbs().maxCoeff();
      const double r_primal = slack.cwiseMax(0.0).maxCoeff();
      const double r_dual = (-*lam).cwiseMax(0.0).maxCoeff();
      const double r_comp = lam->cwiseProduct(slack).cwiseAbs().maxCoeff();
      return std::max({r_stat, r_primal, r_dual, r_comp});
    }
  }
  throw std::invalid_argument("evaluate_residual: unknown variant");
}

}  // namespace qpemu
