#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpemu/qp_core.hpp"

namespace qpemu {

/// Exit codes shared by all commands: 0 success, 2 validation or
/// equivalence failure, 1 operational error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitOperational = 1;
inline constexpr int kExitValidation = 2;

struct GenOptions {
  Variant variant = Variant::LinearlyConstrained;
  Eigen::Index n = 5;
  Eigen::Index m = 3;
  long count = 1;
  std::uint64_t seed = 0;
  std::optional<std::pair<double, double>> kappa_range;
  std::string out;
  std::string solutions_out;  // defaults to out + ".solutions"
  std::string tokens_out;     // optional, LC only
};

struct SolveOptions {
  std::string in;
  long index = 0;
  double tol = 1e-8;
  std::size_t max_iters = 100000;
  std::uint64_t seed = 0;
  std::string out;
  std::string trace_out;  // optional CSV
};

struct CompareOptions {
  std::string dataset;
  Variant variant = Variant::Unconstrained;
  long layers = 200;
  std::uint64_t seed = 0;
  std::string out;
};

struct BenchOptions {
  Variant variant = Variant::Unconstrained;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> dims;
  int reps = 30;
  int warmup = 5;
  std::uint64_t seed = 0;
  std::string out;
};

struct ToyOptions {
  double tau2 = 0.01;
  double sigma2 = 0.5;
  double risk_aversion = 0.2;
  std::vector<long> n_grid = {10, 25, 50, 100, 250, 500, 1000};
  long trials = 100000;
  std::uint64_t seed = 0;
  std::string out;
};

struct ParityOptions {
  Eigen::Index n = 4;
  Eigen::Index tokens = 8;
  long draws = 1000;
  std::uint64_t seed = 0;
  std::string out;  // optional per-draw CSV
};

/// Per-step wall time for one (variant, n, m) point; medians over reps
/// after warmup discards, monotonic clock.
struct BenchRecord {
  Variant variant;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  double classical_ms = 0.0;
  double machine_ms = 0.0;
  double overhead = 0.0;  // machine_ms / classical_ms
  int reps = 0;
  int warmup = 0;
};

int cmd_gen(const GenOptions& opt);
int cmd_solve(const SolveOptions& opt);
int cmd_emulate(const SolveOptions& opt);
int cmd_compare(const CompareOptions& opt);
int cmd_bench(const BenchOptions& opt, std::vector<BenchRecord>* records = nullptr);
int cmd_toy(const ToyOptions& opt);
int cmd_parity(const ParityOptions& opt);

/// The equivalence budget cmd_compare gates on: 1e-9, or 1e-7 for variant C
/// (inner-loop truncation).
double equivalence_budget(Variant v);

}  // namespace qpemu
