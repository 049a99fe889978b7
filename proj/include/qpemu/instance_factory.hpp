#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "qpemu/qp_core.hpp"

namespace qpemu {

/// Seeded Gaussian/uniform stream: mt19937_64 bits, Marsaglia polar method
/// for normals. The name below is recorded in generated instances so the
/// stream a file was produced with is auditable.
inline constexpr const char* kRngName = "mt19937_64-polar-v1";

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : eng_(seed) {}
  double normal();
  double uniform(double lo, double hi);
  /// Fills row-major: row 0 left to right, then row 1, ...
  MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  VectorXd normal_vector(Eigen::Index size);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Random instance: A = GG' + 0.1 I with G ~ N(0,I), b ~ N(0,I), and for LC
/// C ~ N(0,I), d ~ U[1,2]. For R the weight is 0.1*|b|_inf; for C the budget
/// is 0.5*|A^{-1}b|_1. Pure function of (dims, variant, seed).
QpInstance generate_baseline(Eigen::Index n, Eigen::Index m, Variant variant,
                             std::uint64_t seed);

/// Condition-number-controlled instance: A = Q diag(lam) Q' with random
/// orthogonal Q (QR of a Gaussian matrix, R-diagonal signs fixed) and
/// geometrically spaced eigenvalues with ratio kappa ~ U[kappa_range], then
/// rescaled so |A|_F = frob_target (kappa is preserved). frob_target
/// defaults to the Frobenius norm of the baseline draw under the same seed.
QpInstance generate_kappa_shifted(Eigen::Index n, Eigen::Index m, Variant variant,
                                  std::pair<double, double> kappa_range, std::uint64_t seed,
                                  std::optional<double> frob_target = {});

/// Token sequence of length n+m+3 for an LC instance: rows of A, rows of C,
/// b, zero-padded d, and x_init ~ N(0,I) drawn from the instance seed. Each
/// token is an n-vector. Requires m <= n and a seeded instance.
std::vector<VectorXd> tokenize_sequence(const QpInstance& inst);

/// Per-instance solution metrics plus the numerator/denominator pair that
/// dataset-level R^2 aggregates: R^2 = 1 - sum(num)/sum(den).
struct MetricParts {
  double mse = 0.0;
  double nmse = 0.0;
  double r2_num = 0.0;
  double r2_den = 0.0;
};

MetricParts metrics(const VectorXd& pred, const VectorXd& truth, const VectorXd& truth_mean);

}  // namespace qpemu
