#pragma once

#include <cstdint>
#include <vector>

namespace qpemu {

/// Two-asset mean-variance toy model: a Gaussian prior N(0, tau2) on the
/// mean gap, a noisy signal with variance s2 = 2*sigma2/n, and three
/// decision rules (oracle / plug-in / shrunk) compared by Monte Carlo
/// regret.
struct ToyConfig {
  double tau2 = 0.01;
  double sigma2 = 0.5;
  double risk_aversion = 0.2;
  std::vector<long> sample_sizes = {10, 25, 50, 100, 250, 500, 1000};
  long trials = 100000;
  std::uint64_t seed = 0;
};

struct RegretStat {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean
};

struct ToyRow {
  long n = 0;
  double rho = 0.0;
  RegretStat regret_pto;
  RegretStat regret_e2e;
  RegretStat gap;  // paired differences, regret_pto - regret_e2e
};

struct ToyResult {
  std::vector<ToyRow> per_n;
  long chunk_size = 0;  // trials per deterministic substream
};

/// Bayes attenuation rho = tau2 / (tau2 + 2*sigma2/n).
double shrinkage(double tau2, double sigma2, double n);

/// Clipped affine rule w = clamp(1/2 + rho*signal/(4*lambda), 0, 1).
/// rho = 1 gives the plug-in (and, applied to the true gap, oracle) rule.
double decide(double delta_signal, double risk_aversion, double rho);

/// Mean-variance utility with the second asset's mean fixed to 0:
/// U(w; delta) = w*delta - lambda*(w^2 + (1-w)^2).
double toy_utility(double w, double delta, double risk_aversion);

/// U(w*; delta) - U(w; delta) = 2*lambda*(w - w*)^2 when w* is the
/// unclipped optimizer.
double utility_gap(double w, double w_star, double risk_aversion);

/// Paired-sample Monte Carlo: the same draws feed all three rules; regret
/// is measured against the oracle and the gap column is the paired
/// difference. Deterministic for a fixed (seed, chunk-size) pair.
ToyResult run_monte_carlo(const ToyConfig& cfg);

}  // namespace qpemu
