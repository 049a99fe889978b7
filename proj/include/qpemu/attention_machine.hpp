#pragma once

#include <memory>

#include "qpemu/reference_solvers.hpp"

namespace qpemu {

/// A single linear-attention head. Tokens are row vectors z; the head
/// computes q = z_query W_Q and o = sum_t <q, z_t W_K> (z_t W_V) over token
/// rows t, with no softmax and no normalization.
struct LinearAttentionHead {
  MatrixXd w_q;
  MatrixXd w_k;
  MatrixXd w_v;
};

/// Exact linear-attention sum over all token rows (the query's own row
/// included). Accumulation runs in token-row order with compensated (Kahan)
/// summation.
VectorXd head_apply(const LinearAttentionHead& head, const MatrixXd& tokens,
                    Eigen::Index query_row);

/// Same sum restricted to the key rows [key_begin, key_end).
VectorXd head_apply(const LinearAttentionHead& head, const MatrixXd& tokens,
                    Eigen::Index query_row, Eigen::Index key_begin, Eigen::Index key_end);

/// Two-layer ReLU FFN with W1 = [I; -I], W2 = [I, -I] and bias -theta*1,
/// which computes soft-thresholding exactly:
///   W2 ReLU(W1 y - theta 1) = (y - theta)_+ - (-y - theta)_+ = S_theta(y).
struct SoftThresholdFfn {
  MatrixXd w1;        // (2n) x n, stacking [I; -I]
  MatrixXd w2;        // n x (2n), concatenation [I, -I]
  double bias_theta;  // >= 0

  static SoftThresholdFfn make(Eigen::Index n, double theta);

  VectorXd apply(const VectorXd& y) const { return apply(y, bias_theta); }
  /// Same weights, threshold overridden (the threshold loop sweeps theta).
  VectorXd apply(const VectorXd& y, double theta) const;
};

struct ThresholdLoopResult {
  double theta_star = 0.0;
  VectorXd x;
  std::size_t inner_iters = 0;
};

struct ThresholdLoopDefaults {
  static constexpr double inner_tol = 1e-12;
  static constexpr std::size_t max_inner = 100000;
};

/// Scalar ascent theta_{t+1} = theta_t + eta * relu(|S_theta(y)|_1 - B) from
/// theta_0 = 0. With 0 < eta <= 1/n the excess shrinks monotonically to 0
/// and S_{theta*}(y) is the exact Euclidean projection onto the l1 ball.
/// Optionally logs (theta_t, excess_t) pairs. Throws ConvergenceError
/// (carrying theta, excess) if max_inner is exhausted.
ThresholdLoopResult threshold_loop(const VectorXd& y, double budget, double eta,
                                   std::size_t max_inner = ThresholdLoopDefaults::max_inner,
                                   double inner_tol = ThresholdLoopDefaults::inner_tol,
                                   std::vector<std::pair<double, double>>* log = nullptr);

/// Token matrix for the unconstrained construction, (n+2) x (2n+1):
/// rows [a_i', e_i', 0] for i<n, then [0', b', 1], then [x', 0', 1].
struct TokenStateU {
  MatrixXd tokens;
  double gamma;

  static TokenStateU build(const QpInstance& inst, double gamma, const VectorXd& x0);
};

/// Token matrix for the linearly constrained construction,
/// (n+m+2) x (2n+m+1): rows [a_i', e_i^(n)', 0_m', b_i], [c_i', 0', e_i^(m)', -d_i],
/// [x', 0', 0', 1], [0', 0', lam', 1].
struct TokenStateLC {
  MatrixXd tokens;
  double gamma;
  double eta;

  static TokenStateLC build(const QpInstance& inst, double gamma, double eta,
                            const VectorXd& x0, const VectorXd& lam0);
};

/// A built construction: fixed weights, mutable iterate rows. One
/// apply_layer() reproduces one iteration of the corresponding classical
/// method. Data rows are never touched after construction.
class Machine {
 public:
  virtual ~Machine() = default;
  virtual void apply_layer() = 0;
  virtual VectorXd x() const = 0;
  virtual std::optional<VectorXd> lambda() const { return std::nullopt; }
  virtual const MatrixXd& tokens() const = 0;
  virtual void set_x(const VectorXd& x) = 0;
  virtual void set_lambda(const VectorXd&) {
    throw std::invalid_argument("machine has no dual token");
  }
};

std::unique_ptr<Machine> build_u_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0);
std::unique_ptr<Machine> build_lc_machine(const QpInstance& inst, const StepSizes& steps,
                                          const VectorXd& x0, const VectorXd& lam0);
std::unique_ptr<Machine> build_r_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0);
std::unique_ptr<Machine> build_c_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0);

/// Dispatch on inst.variant(); x0/lam0 defaulting to zero vectors.
std::unique_ptr<Machine> build_machine(const QpInstance& inst, const StepSizes& steps,
                                       std::optional<VectorXd> x0 = {},
                                       std::optional<VectorXd> lam0 = {});

/// Runs layers until cfg.tol or cfg.max_iters, recording the same trace a
/// classical run() would.
SolverTrace emulate(const QpInstance& inst, const StepSizes& steps, const SolveConfig& cfg);

}  // namespace qpemu
