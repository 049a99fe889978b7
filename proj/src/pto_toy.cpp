#include "qpemu/pto_toy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qpemu/instance_factory.hpp"

namespace qpemu {

double shrinkage(double tau2, double sigma2, double n) {
  if (!(tau2 > 0.0) || !(sigma2 > 0.0) || !(n > 0.0))
    throw std::invalid_argument("shrinkage: all inputs must be positive");
  return tau2 / (tau2 + 2.0 * sigma2 / n);
}

double decide(double delta_signal, double risk_aversion, double rho) {
  if (!(rho > 0.0) || rho > 1.0) throw std::invalid_argument("decide: rho must be in (0, 1]");
  if (!(risk_aversion > 0.0))
    throw std::invalid_argument("decide: risk_aversion must be positive");
  const double raw = 0.5 + rho * delta_signal / (4.0 * risk_aversion);
  return std::clamp(raw, 0.0, 1.0);
}

double toy_utility(double w, double delta, double risk_aversion) {
  return w * delta - risk_aversion * (w * w + (1.0 - w) * (1.0 - w));
}

double utility_gap(double w, double w_star, double risk_aversion) {
  const double diff = w - w_star;
  return 2.0 * risk_aversion * diff * diff;
}

namespace {

// Streaming mean/variance (Welford), merged deterministically chunk by
// chunk so a future parallel fan-out keeps bit-identical results.
struct Welford {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++count;
    const double d1 = v - mean;
    mean += d1 / static_cast<double>(count);
    m2 += d1 * (v - mean);
  }

  void merge(const Welford& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double total = na + nb;
    mean += delta * nb / total;
    m2 += other.m2 + delta * delta * na * nb / total;
    count += other.count;
  }

  RegretStat stat() const {
    RegretStat s;
    s.mean = mean;
    if (count > 1)
      s.se = std::sqrt(m2 / static_cast<double>(count - 1) / static_cast<double>(count));
    return s;
  }
};

}  // namespace

ToyResult run_monte_carlo(const ToyConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_monte_carlo: trials must be >= 1");
  if (!(cfg.tau2 > 0.0) || !(cfg.sigma2 > 0.0) || !(cfg.risk_aversion > 0.0))
    throw std::invalid_argument("run_monte_carlo: variances and risk aversion must be positive");
  if (cfg.sample_sizes.empty())
    throw std::invalid_argument("run_monte_carlo: sample_sizes must be nonempty");

  constexpr long kChunk = 65536;
  ToyResult result;
  result.chunk_size = kChunk;
  result.per_n.reserve(cfg.sample_sizes.size());

  const double tau = std::sqrt(cfg.tau2);
  double prev_rho = 0.0;
  for (std::size_t ni = 0; ni < cfg.sample_sizes.size(); ++ni) {
    const long n = cfg.sample_sizes[ni];
    if (n < 1) throw std::invalid_argument("run_monte_carlo: sample sizes must be positive");
    const double s2 = 2.0 * cfg.sigma2 / static_cast<double>(n);
    const double s = std::sqrt(s2);
    const double rho = shrinkage(cfg.tau2, cfg.sigma2, static_cast<double>(n));
    if (!(rho > prev_rho))
      throw std::runtime_error("run_monte_carlo: rho not strictly increasing");
    prev_rho = rho;

    Welford pto, e2e, gap;
    long done = 0;
    for (long chunk = 0; done < cfg.trials; ++chunk) {
      const long count = std::min(kChunk, cfg.trials - done);
      RandomStream stream(mix_seed(cfg.seed, mix_seed(static_cast<std::uint64_t>(ni),
                                                      static_cast<std::uint64_t>(chunk))));
      Welford c_pto, c_e2e, c_gap;
      for (long t = 0; t < count; ++t) {
        const double delta = tau * stream.normal();
        const double signal = delta + s * stream.normal();
        const double w_or = decide(delta, cfg.risk_aversion, 1.0);
        const double w_pto = decide(signal, cfg.risk_aversion, 1.0);
        const double w_e2e = decide(signal, cfg.risk_aversion, rho);
        const double u_or = toy_utility(w_or, delta, cfg.risk_aversion);
        const double u_pto = toy_utility(w_pto, delta, cfg.risk_aversion);
        const double u_e2e = toy_utility(w_e2e, delta, cfg.risk_aversion);
        c_pto.add(u_or - u_pto);
        c_e2e.add(u_or - u_e2e);
        c_gap.add(u_e2e - u_pto);  // regret_pto - regret_e2e, paired
      }
      pto.merge(c_pto);
      e2e.merge(c_e2e);
      gap.merge(c_gap);
      done += count;
    }

    ToyRow row;
    row.n = n;
    row.rho = rho;
    row.regret_pto = pto.stat();
    row.regret_e2e = e2e.stat();
    row.gap = gap.stat();
    result.per_n.push_back(row);
  }
  return result;
}

}  // namespace qpemu
