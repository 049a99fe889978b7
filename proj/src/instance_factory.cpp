#include "qpemu/instance_factory.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>

namespace qpemu {

double RandomStream::normal() {
  // Marsaglia polar method; consumes a variable number of uniforms but is a
  // pure function of the engine state.
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = uniform(-1.0, 1.0);
    v = uniform(-1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

double RandomStream::uniform(double lo, double hi) {
  const double u01 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u01 * (hi - lo);
}

MatrixXd RandomStream::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

VectorXd RandomStream::normal_vector(Eigen::Index size) {
  VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = normal();
  return v;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over seed ^ salt.
  std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

MatrixXd baseline_a(RandomStream& stream, Eigen::Index n) {
  const MatrixXd g = stream.normal_matrix(n, n);
  MatrixXd a = g * g.transpose() + 0.1 * MatrixXd::Identity(n, n);
  return 0.5 * (a + a.transpose());
}

// Finishes an instance once A and the stream are positioned after the
// A-draw: b, then (C, d) for LC; derived weight/budget for R/C.
QpInstance assemble(MatrixXd a, RandomStream& stream, Eigen::Index n, Eigen::Index m,
                    Variant variant, std::uint64_t seed) {
  const VectorXd b = stream.normal_vector(n);
  QpInstance inst = [&]() {
    switch (variant) {
      case Variant::Unconstrained:
        return QpInstance::unconstrained(std::move(a), b, seed);
      case Variant::LinearlyConstrained: {
        if (m < 1) throw std::invalid_argument("generate: LC requires m >= 1");
        MatrixXd c = stream.normal_matrix(m, n);
        VectorXd d(m);
        for (Eigen::Index i = 0; i < m; ++i) d[i] = stream.uniform(1.0, 2.0);
        return QpInstance::linearly_constrained(std::move(a), b, std::move(c), std::move(d),
                                                seed);
      }
      case Variant::L1Regularized: {
        const double weight = 0.1 * b.cwiseAbs().maxCoeff();
        if (!(weight > 0.0)) throw std::runtime_error("generate: degenerate b draw");
        return QpInstance::l1_regularized(std::move(a), b, weight, seed);
      }
      case Variant::L1Constrained: {
        const VectorXd x_star = a.ldlt().solve(-b);
        const double budget = 0.5 * x_star.cwiseAbs().sum();
        if (!(budget > 0.0)) throw std::runtime_error("generate: degenerate b draw");
        return QpInstance::l1_constrained(std::move(a), b, budget, seed);
      }
    }
    throw std::invalid_argument("generate: unknown variant");
  }();
  inst.set_rng_name(kRngName);
  return inst;
}

}  // namespace

QpInstance generate_baseline(Eigen::Index n, Eigen::Index m, Variant variant,
                             std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_baseline: n must be >= 1");
  if (variant != Variant::LinearlyConstrained && m != 0)
    throw std::invalid_argument("generate_baseline: m must be 0 unless variant LC");
  RandomStream stream(seed);
  MatrixXd a = baseline_a(stream, n);
  return assemble(std::move(a), stream, n, m, variant, seed);
}

QpInstance generate_kappa_shifted(Eigen::Index n, Eigen::Index m, Variant variant,
                                  std::pair<double, double> kappa_range, std::uint64_t seed,
                                  std::optional<double> frob_target) {
  const auto [lo, hi] = kappa_range;
  if (!(1.0 < lo && lo < hi))
    throw std::invalid_argument("generate_kappa_shifted: need 1 < low < high");
  if (n < 2) throw std::invalid_argument("generate_kappa_shifted: n must be >= 2");
  if (variant != Variant::LinearlyConstrained && m != 0)
    throw std::invalid_argument("generate_kappa_shifted: m must be 0 unless variant LC");

  // Match the baseline Frobenius norm per-sample unless told otherwise.
  double target = frob_target.value_or(0.0);
  if (!frob_target) {
    RandomStream probe(seed);
    target = baseline_a(probe, n).norm();
  }
  if (!(target > 0.0))
    throw std::invalid_argument("generate_kappa_shifted: frob_target must be > 0");

  RandomStream stream(seed);
  const double kappa = stream.uniform(lo, hi);

  // Random orthogonal Q: QR of a Gaussian matrix, R-diagonal signs fixed.
  const MatrixXd gauss = stream.normal_matrix(n, n);
  Eigen::HouseholderQR<MatrixXd> qr(gauss);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);

  // Geometrically spaced eigenvalues with ratio kappa; scale is fixed by
  // the Frobenius normalization afterwards, which preserves kappa.
  VectorXd eigs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    eigs[i] = std::pow(kappa, static_cast<double>(i) / static_cast<double>(n - 1));
  MatrixXd a = q * eigs.asDiagonal() * q.transpose();
  a = (0.5 * (a + a.transpose())).eval();
  a *= target / a.norm();

  return assemble(std::move(a), stream, n, m, variant, seed);
}

std::vector<VectorXd> tokenize_sequence(const QpInstance& inst) {
  if (inst.variant() != Variant::LinearlyConstrained)
    throw std::invalid_argument("tokenize_sequence: variant must be LC");
  const Eigen::Index n = inst.n();
  const Eigen::Index m = inst.m();
  if (m > n) throw std::invalid_argument("tokenize_sequence: m > n, d cannot be embedded");
  if (!inst.seed())
    throw std::invalid_argument("tokenize_sequence: instance carries no seed for x_init");

  std::vector<VectorXd> tokens;
  tokens.reserve(n + m + 3);
  for (Eigen::Index i = 0; i < n; ++i) tokens.push_back(inst.a_matrix().row(i).transpose());
  for (Eigen::Index i = 0; i < m; ++i) tokens.push_back(inst.c_matrix().row(i).transpose());
  tokens.push_back(inst.b_vec());
  VectorXd padded = VectorXd::Zero(n);
  padded.head(m) = inst.d_vec();
  tokens.push_back(std::move(padded));
  RandomStream stream(mix_seed(*inst.seed(), 0x746f6b656e730031ULL));
  tokens.push_back(stream.normal_vector(n));
  return tokens;
}

MetricParts metrics(const VectorXd& pred, const VectorXd& truth, const VectorXd& truth_mean) {
  if (pred.size() != truth.size() || truth_mean.size() != truth.size())
    throw std::invalid_argument("metrics: dimension mismatch");
  const double err2 = (pred - truth).squaredNorm();
  const double truth2 = truth.squaredNorm();
  if (truth2 == 0.0) throw std::invalid_argument("metrics: NMSE undefined for zero truth");
  MetricParts parts;
  parts.mse = err2 / static_cast<double>(pred.size());
  parts.nmse = err2 / truth2;
  parts.r2_num = err2;
  parts.r2_den = (truth_mean - truth).squaredNorm();
  return parts;
}

}  // namespace qpemu
