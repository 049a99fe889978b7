#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

#include "qpemu/pto_toy.hpp"

using namespace qpemu;

TEST_CASE("shrinkage formula and limits") {
  CHECK(shrinkage(0.01, 0.5, 100.0) == 0.5);  // s^2 = 0.01 exactly
  CHECK(shrinkage(0.01, 0.5, 1e9) > 0.999);
  CHECK(shrinkage(1e-12, 0.5, 100.0) < 1e-6);
  CHECK_THROWS_AS(shrinkage(0.0, 0.5, 10.0), std::invalid_argument);
}

TEST_CASE("decide clipped affine rule") {
  CHECK(decide(0.4, 0.2, 1.0) == 1.0);   // 0.5 + 0.5 clipped at 1
  CHECK(decide(0.4, 0.2, 0.5) == 0.75);
  CHECK(decide(0.0, 0.2, 0.5) == 0.5);
  CHECK(decide(0.0, 0.7, 1.0) == 0.5);
  CHECK(decide(-10.0, 0.2, 1.0) == 0.0);
  CHECK_THROWS_AS(decide(0.1, 0.2, 1.5), std::invalid_argument);
}

TEST_CASE("utility_gap examples and interior identity") {
  CHECK(utility_gap(0.3, 0.3, 0.2) == 0.0);
  CHECK(utility_gap(1.0, 0.5, 0.2) == doctest::Approx(0.1).epsilon(1e-15));

  // Against the full utility: exact when w* is the unclipped optimizer.
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double lambda = 0.1 + unif(eng);
    // Choose delta so w* = 1/2 + delta/(4 lambda) stays interior.
    const double w_star_target = 0.05 + 0.9 * unif(eng);
    const double delta = (w_star_target - 0.5) * 4.0 * lambda;
    const double w_star = decide(delta, lambda, 1.0);
    REQUIRE(w_star == doctest::Approx(w_star_target).epsilon(1e-12));
    const double w = unif(eng);
    const double lhs = utility_gap(w, w_star, lambda);
    const double rhs = toy_utility(w_star, delta, lambda) - toy_utility(w, delta, lambda);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("monte carlo dominance with the figure parameters at reduced trials") {
  ToyConfig cfg;
  cfg.trials = 20000;
  cfg.seed = 7;
  const ToyResult result = run_monte_carlo(cfg);
  REQUIRE(result.per_n.size() == 7);

  double prev_rho = 0.0;
  for (const auto& row : result.per_n) {
    CHECK(row.rho > prev_rho);
    CHECK(row.rho > 0.0);
    CHECK(row.rho < 1.0);
    prev_rho = row.rho;
    CHECK(row.regret_e2e.mean <= row.regret_pto.mean);
    CHECK(row.regret_e2e.mean <= row.regret_pto.mean + 2.0 * row.gap.se);
    if (row.n <= 100) CHECK(row.gap.mean > 3.0 * row.gap.se);
  }
  CHECK(result.per_n[3].rho == 0.5);  // n = 100 with the figure parameters

  // The regret gap shrinks as the signal cleans up, within noise.
  for (std::size_t i = 0; i + 1 < result.per_n.size(); ++i) {
    const auto& cur = result.per_n[i];
    const auto& next = result.per_n[i + 1];
    CHECK(next.gap.mean <= cur.gap.mean + 2.0 * (cur.gap.se + next.gap.se));
  }

  // Independent re-run at a different seed reproduces the dominance.
  ToyConfig cfg2 = cfg;
  cfg2.trials = 10000;
  cfg2.seed = 1234;
  const ToyResult rerun = run_monte_carlo(cfg2);
  for (const auto& row : rerun.per_n)
    CHECK(row.regret_e2e.mean <= row.regret_pto.mean + 2.0 * row.gap.se);
}

TEST_CASE("rules coincide in the zero-noise limit") {
  ToyConfig cfg;
  cfg.sample_sizes = {1000000000};
  cfg.trials = 20000;
  cfg.seed = 3;
  const ToyResult result = run_monte_carlo(cfg);
  const auto& row = result.per_n.front();
  const double combined_se = row.regret_pto.se + row.regret_e2e.se;
  CHECK(std::abs(row.regret_pto.mean - row.regret_e2e.mean) <= 3.0 * combined_se + 1e-12);
}

TEST_CASE("monte carlo is deterministic bit for bit") {
  ToyConfig cfg;
  cfg.trials = 5000;
  cfg.seed = 99;
  const ToyResult a = run_monte_carlo(cfg);
  const ToyResult b = run_monte_carlo(cfg);
  REQUIRE(a.per_n.size() == b.per_n.size());
  for (std::size_t i = 0; i < a.per_n.size(); ++i) {
    CHECK(a.per_n[i].rho == b.per_n[i].rho);
    CHECK(a.per_n[i].regret_pto.mean == b.per_n[i].regret_pto.mean);
    CHECK(a.per_n[i].regret_e2e.mean == b.per_n[i].regret_e2e.mean);
    CHECK(a.per_n[i].gap.mean == b.per_n[i].gap.mean);
    CHECK(a.per_n[i].gap.se == b.per_n[i].gap.se);
  }
}

TEST_CASE("oracle rule dominates every draw pointwise") {
  std::mt19937_64 eng(21);
  std::normal_distribution<double> normal;
  const double tau = 0.1, s = 0.1, lambda = 0.2;
  for (int trial = 0; trial < 5000; ++trial) {
    const double delta = tau * normal(eng);
    const double signal = delta + s * normal(eng);
    const double w_or = decide(delta, lambda, 1.0);
    const double u_or = toy_utility(w_or, delta, lambda);
    CHECK(u_or >= toy_utility(decide(signal, lambda, 1.0), delta, lambda) - 1e-12);
    CHECK(u_or >= toy_utility(decide(signal, lambda, 0.5), delta, lambda) - 1e-12);
  }
}

TEST_CASE("plug-in decision error grows with signal strength while shrunk stays flat") {
  // Binned |signal| below the clipping knee 2*lambda: mean plug-in error is
  // nondecreasing across bins, shrunk-rule error stays within a factor two
  // of its own mean.
  const double tau2 = 0.01, sigma2 = 0.5, lambda = 0.2;
  const long n = 100;
  const double s = std::sqrt(2.0 * sigma2 / static_cast<double>(n));
  const double rho = shrinkage(tau2, sigma2, static_cast<double>(n));
  const double knee = 2.0 * lambda;
  constexpr int kBins = 6;
  std::array<double, kBins> pto_sum{}, e2e_sum{};
  std::array<long, kBins> count{};

  std::mt19937_64 eng(17);
  std::normal_distribution<double> normal;
  for (long trial = 0; trial < 400000; ++trial) {
    const double delta = std::sqrt(tau2) * normal(eng);
    const double signal = delta + s * normal(eng);
    if (std::abs(signal) >= 0.75 * knee) continue;  // below the clipping knee
    const int bin = static_cast<int>(std::abs(signal) / (0.75 * knee) * kBins);
    const double w_or = decide(delta, lambda, 1.0);
    pto_sum[bin] += std::abs(decide(signal, lambda, 1.0) - w_or);
    e2e_sum[bin] += std::abs(decide(signal, lambda, rho) - w_or);
    ++count[bin];
  }
  double e2e_total = 0.0;
  long total = 0;
  for (int b = 0; b < kBins; ++b) {
    REQUIRE(count[b] > 1000);
    e2e_total += e2e_sum[b];
    total += count[b];
  }
  const double e2e_global = e2e_total / static_cast<double>(total);
  double prev = 0.0;
  for (int b = 0; b < kBins; ++b) {
    const double pto_mean = pto_sum[b] / static_cast<double>(count[b]);
    const double e2e_mean = e2e_sum[b] / static_cast<double>(count[b]);
    CHECK(pto_mean >= prev - 1e-3);
    prev = pto_mean;
    CHECK(e2e_mean <= 2.0 * e2e_global);
    CHECK(e2e_mean >= 0.5 * e2e_global);
  }
}
