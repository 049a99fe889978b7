#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qpemu {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// The four problem classes. Objective is always 1/2 x'Ax + b'x with A
/// symmetric positive definite; the variant decides the constraint or
/// penalty attached to it.
enum class Variant {
  Unconstrained,        // min 1/2 x'Ax + b'x
  LinearlyConstrained,  // ... s.t. Cx <= d
  L1Regularized,        // ... + l1_weight * |x|_1
  L1Constrained,        // ... s.t. |x|_1 <= l1_budget
};

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

/// Thrown by iterative routines that hit their iteration cap. Carries the
/// last estimate so callers can inspect how close the routine got.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_estimate, double last_residual)
      : std::runtime_error(what), estimate(last_estimate), residual(last_residual) {}
  double estimate;
  double residual;
};

/// Largest eigenvalue of a symmetric PD matrix by power iteration with a
/// deterministic start vector. Accurate to ~1e-11 relative against a dense
/// eigendecomposition on well-separated spectra.
double power_lipschitz(const MatrixXd& a_matrix);

/// Operator norm |C|_2 = sqrt(lambda_max(C'C)), via power iteration on C'C.
double operator_norm(const MatrixXd& c_matrix);

/// One QP problem instance. Immutable after construction; construction
/// validates symmetry (within 1e-12 elementwise, then symmetrizes),
/// positive definiteness (all LDL' pivots strictly positive), per-variant
/// field presence, and for LC certifies the feasible set nonempty.
class QpInstance {
 public:
  static QpInstance unconstrained(MatrixXd a, VectorXd b,
                                  std::optional<std::uint64_t> seed = {});
  static QpInstance linearly_constrained(MatrixXd a, VectorXd b, MatrixXd c, VectorXd d,
                                         std::optional<std::uint64_t> seed = {});
  static QpInstance l1_regularized(MatrixXd a, VectorXd b, double l1_weight,
                                   std::optional<std::uint64_t> seed = {});
  static QpInstance l1_constrained(MatrixXd a, VectorXd b, double l1_budget,
                                   std::optional<std::uint64_t> seed = {});

  Variant variant() const { return variant_; }
  Eigen::Index n() const { return b_.size(); }
  Eigen::Index m() const { return variant_ == Variant::LinearlyConstrained ? d_.size() : 0; }

  const MatrixXd& a_matrix() const { return a_; }
  const VectorXd& b_vec() const { return b_; }
  const MatrixXd& c_matrix() const;  // LC only
  const VectorXd& d_vec() const;     // LC only
  double l1_weight() const;          // R only
  double l1_budget() const;          // C only

  std::optional<std::uint64_t> seed() const { return seed_; }
  const std::string& rng_name() const { return rng_name_; }
  void set_rng_name(std::string name) { rng_name_ = std::move(name); }

  /// lambda_max(A), computed once at construction.
  double lipschitz() const { return lipschitz_; }
  /// |C|_2, computed once at construction (LC only).
  double c_opnorm() const;

 private:
  QpInstance(Variant v, MatrixXd a, VectorXd b, std::optional<MatrixXd> c,
             std::optional<VectorXd> d, std::optional<double> l1w, std::optional<double> l1b,
             std::optional<std::uint64_t> seed);
  void validate_and_finalize();
  void certify_feasible() const;

  Variant variant_;
  MatrixXd a_;
  VectorXd b_;
  MatrixXd c_;  // empty unless LC
  VectorXd d_;  // empty unless LC
  std::optional<double> l1_weight_;
  std::optional<double> l1_budget_;
  std::optional<std::uint64_t> seed_;
  std::string rng_name_;
  double lipschitz_ = 0.0;
  double c_opnorm_ = 0.0;
};

/// Step sizes for the per-variant update maps. gamma is the primal step,
/// eta the dual step (LC) or threshold-loop step (C). lipschitz and
/// c_opnorm carry the constants the validity conditions are stated in.
struct StepSizes {
  double gamma = 0.0;
  double eta = 0.0;
  double lipschitz = 0.0;
  std::optional<double> c_opnorm;

  /// gamma = 1/L, eta = 0.5/(gamma |C|_2^2) for LC, eta = 1/n otherwise.
  static StepSizes defaults(const QpInstance& inst);

  /// Checks the variant's step-size conditions; throws std::invalid_argument.
  void validate(const QpInstance& inst) const;
};

/// Per-iteration record of a solver or machine run. All sequences have the
/// same length; duals present only for LC.
struct SolverTrace {
  std::vector<VectorXd> iterates;
  std::optional<std::vector<VectorXd>> duals;
  std::vector<double> objectives;
  std::vector<double> residuals;
  bool converged = false;
  std::size_t iterations = 0;
};

/// 1/2 x'Ax + b'x, plus l1_weight*|x|_1 for variant R. For LC and C this is
/// the smooth part only.
double evaluate_objective(const QpInstance& inst, const VectorXd& x);

/// Class-specific convergence residual, zero exactly at fixed points of the
/// corresponding update map:
///   U  : |Ax+b|_inf
///   R  : |x - S_{gl}(x - g(Ax+b))|_inf with g = 1/L
///   C  : |x - Proj_B(x - g(Ax+b))|_inf with g = 1/L
///   LC : max(stationarity, primal violation, dual negativity, complementarity)
double evaluate_residual(const QpInstance& inst, const VectorXd& x,
                         const std::optional<VectorXd>& lam = {});

}  // namespace qpemu
