#include "qpemu/experiment_cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "qpemu/attention_machine.hpp"
#include "qpemu/instance_factory.hpp"
#include "qpemu/parity_probe.hpp"
#include "qpemu/pto_toy.hpp"
#include "qpemu/reference_solvers.hpp"
#include "qpemu/serialize.hpp"
#include "qpemu/sha256.hpp"

namespace qpemu {

double equivalence_budget(Variant v) {
  return v == Variant::L1Constrained ? 1e-7 : 1e-9;
}

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string host_name() {
  std::ifstream in("/proc/sys/kernel/hostname");
  std::string name;
  if (in && std::getline(in, name) && !name.empty()) return name;
  return "unknown";
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find("model name");
    if (pos != std::string::npos) {
      const auto colon = line.find(':');
      if (colon != std::string::npos && colon + 2 <= line.size())
        return line.substr(colon + 2);
    }
  }
  return "unknown";
}

// Every command writes <out>.manifest.json describing what it produced.
void write_manifest(const std::string& command, const nlohmann::json& args, std::uint64_t seed,
                    const std::string& out_path, const std::vector<std::string>& artifacts,
                    const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json manifest;
  manifest["command"] = command;
  manifest["args"] = args;
  manifest["seed"] = seed;
  manifest["host"] = host_name();
  manifest["timestamp"] = iso_timestamp();
  nlohmann::json arts = nlohmann::json::array();
  for (const auto& path : artifacts)
    arts.push_back({{"path", path}, {"sha256", sha256_file(path)}});
  manifest["artifact"] = std::move(arts);
  if (!extra.empty()) manifest["extra"] = extra;

  std::ofstream out(out_path + ".manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot open manifest for " + out_path);
  out << manifest.dump(2) << '\n';
}

SolverTrace reference_solution(const QpInstance& inst) {
  SolveConfig cfg = SolveConfig::defaults(inst);
  cfg.tol = 1e-10;
  cfg.max_iters = inst.variant() == Variant::LinearlyConstrained ? 1000000 : 200000;
  cfg.record_trace = false;
  return run(inst, StepSizes::defaults(inst), cfg);
}

VectorXd classical_step(const QpInstance& inst, const StepSizes& steps, const VectorXd& x,
                        VectorXd* lam) {
  switch (inst.variant()) {
    case Variant::Unconstrained: return gd_step(inst, steps, x);
    case Variant::L1Regularized: return ista_step(inst, steps, x);
    case Variant::L1Constrained: return pgd_step(inst, steps, x);
    case Variant::LinearlyConstrained: {
      auto [xn, ln] = arrow_hurwicz_step(inst, steps, x, *lam);
      *lam = std::move(ln);
      return std::move(xn);
    }
  }
  throw std::invalid_argument("unknown variant");
}

}  // namespace

int cmd_gen(const GenOptions& opt) {
  if (opt.count < 1) throw std::invalid_argument("gen: count must be >= 1");
  if (opt.out.empty()) throw std::invalid_argument("gen: --out required");
  const std::string solutions_path =
      opt.solutions_out.empty() ? opt.out + ".solutions" : opt.solutions_out;
  if (!opt.tokens_out.empty() && opt.variant != Variant::LinearlyConstrained)
    throw std::invalid_argument("gen: token output only defined for variant LC");

  std::vector<QpInstance> instances;
  instances.reserve(static_cast<std::size_t>(opt.count));
  for (long i = 0; i < opt.count; ++i) {
    const std::uint64_t seed_i = mix_seed(opt.seed, static_cast<std::uint64_t>(i));
    if (opt.kappa_range)
      instances.push_back(
          generate_kappa_shifted(opt.n, opt.m, opt.variant, *opt.kappa_range, seed_i));
    else
      instances.push_back(generate_baseline(opt.n, opt.m, opt.variant, seed_i));
  }
  write_dataset(opt.out, instances);

  {
    std::ofstream sol(solutions_path, std::ios::binary);
    if (!sol) throw std::runtime_error("gen: cannot open " + solutions_path);
    for (const auto& inst : instances)
      sol << solution_to_json(reference_solution(inst)).dump() << '\n';
  }

  std::vector<std::string> artifacts = {opt.out, solutions_path};
  if (!opt.tokens_out.empty()) {
    std::ofstream tok(opt.tokens_out, std::ios::binary);
    if (!tok) throw std::runtime_error("gen: cannot open " + opt.tokens_out);
    for (const auto& inst : instances) {
      nlohmann::json seq = nlohmann::json::array();
      for (const auto& token : tokenize_sequence(inst)) {
        nlohmann::json arr = nlohmann::json::array();
        for (Eigen::Index i = 0; i < token.size(); ++i) arr.push_back(token[i]);
        seq.push_back(std::move(arr));
      }
      tok << seq.dump() << '\n';
    }
    artifacts.push_back(opt.tokens_out);
  }

  nlohmann::json args = {{"variant", std::string(to_string(opt.variant))},
                         {"n", opt.n},
                         {"m", opt.m},
                         {"count", opt.count}};
  if (opt.kappa_range)
    args["kappa"] = {opt.kappa_range->first, opt.kappa_range->second};
  write_manifest("gen", args, opt.seed, opt.out, artifacts);
  return kExitOk;
}

namespace {

int solve_like(const SolveOptions& opt, bool machine_route) {
  if (opt.in.empty() || opt.out.empty())
    throw std::invalid_argument("solve: --in and --out required");
  const std::vector<QpInstance> instances = read_dataset(opt.in);
  if (instances.empty()) throw std::invalid_argument("no instances");
  if (opt.index < 0 || static_cast<std::size_t>(opt.index) >= instances.size())
    throw std::invalid_argument("solve: index out of range");
  const QpInstance& inst = instances[static_cast<std::size_t>(opt.index)];

  SolveConfig cfg = SolveConfig::defaults(inst);
  cfg.tol = opt.tol;
  cfg.max_iters = opt.max_iters;
  cfg.record_trace = !opt.trace_out.empty();
  const StepSizes steps = StepSizes::defaults(inst);
  const SolverTrace trace = machine_route ? emulate(inst, steps, cfg) : run(inst, steps, cfg);

  {
    std::ofstream out(opt.out, std::ios::binary);
    if (!out) throw std::runtime_error("solve: cannot open " + opt.out);
    out << solution_to_json(trace).dump(2) << '\n';
  }
  std::vector<std::string> artifacts = {opt.out};
  if (!opt.trace_out.empty()) {
    std::ofstream out(opt.trace_out, std::ios::binary);
    if (!out) throw std::runtime_error("solve: cannot open " + opt.trace_out);
    trace_to_csv(trace, out, machine_route ? "machine" : "");
    artifacts.push_back(opt.trace_out);
  }
  nlohmann::json args = {{"in", opt.in},
                         {"index", opt.index},
                         {"tol", opt.tol},
                         {"max_iters", opt.max_iters}};
  write_manifest(machine_route ? "emulate" : "solve", args, opt.seed, opt.out, artifacts);
  return kExitOk;
}

}  // namespace

int cmd_solve(const SolveOptions& opt) { return solve_like(opt, false); }

int cmd_emulate(const SolveOptions& opt) { return solve_like(opt, true); }

int cmd_compare(const CompareOptions& opt) {
  if (opt.dataset.empty() || opt.out.empty())
    throw std::invalid_argument("compare: --dataset and --out required");
  if (opt.layers < 1) throw std::invalid_argument("compare: layers must be >= 1");
  const std::vector<QpInstance> instances = read_dataset(opt.dataset);
  if (instances.empty()) throw std::invalid_argument("no instances");
  for (const auto& inst : instances)
    if (inst.variant() != opt.variant)
      throw std::invalid_argument("compare: dataset variant mismatch");

  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw std::runtime_error("compare: cannot open " + opt.out);
  out << "instance_id,iter,dist_classical,dist_machine,impl_gap\n";

  double max_gap = 0.0;
  for (std::size_t id = 0; id < instances.size(); ++id) {
    const QpInstance& inst = instances[id];
    const StepSizes steps = StepSizes::defaults(inst);
    const bool is_lc = inst.variant() == Variant::LinearlyConstrained;

    const SolverTrace ref = reference_solution(inst);
    const VectorXd& x_star = ref.iterates.back();

    VectorXd x_c = VectorXd::Zero(inst.n());
    VectorXd lam_c = is_lc ? VectorXd::Zero(inst.m()) : VectorXd();
    auto machine = build_machine(inst, steps);

    for (long k = 0; k <= opt.layers; ++k) {
      const VectorXd x_m = machine->x();
      double gap = (x_c - x_m).cwiseAbs().maxCoeff();
      if (is_lc) {
        const VectorXd lam_m = *machine->lambda();
        gap = std::max(gap, (lam_c - lam_m).cwiseAbs().maxCoeff());
      }
      max_gap = std::max(max_gap, gap);
      out << id << ',' << k << ',' << format_double((x_c - x_star).norm()) << ','
          << format_double((x_m - x_star).norm()) << ',' << format_double(gap) << '\n';
      if (k == opt.layers) break;
      x_c = classical_step(inst, steps, x_c, &lam_c);
      machine->apply_layer();
    }
  }
  out.close();

  nlohmann::json args = {{"dataset", opt.dataset},
                         {"variant", std::string(to_string(opt.variant))},
                         {"layers", opt.layers}};
  nlohmann::json extra = {{"max_impl_gap", max_gap},
                          {"budget", equivalence_budget(opt.variant)}};
  write_manifest("compare", args, opt.seed, opt.out, {opt.out}, extra);

  if (max_gap > equivalence_budget(opt.variant)) {
    std::cerr << "compare: implementation gap " << max_gap << " exceeds budget "
              << equivalence_budget(opt.variant) << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Step>
double time_per_step_ms(Step&& step, int reps, int warmup) {
  // Calibrate an inner batch so one rep spans ~2 ms, then take the median
  // of per-step times across reps.
  constexpr double kTargetMs = 2.0;
  const auto probe_start = Clock::now();
  for (int i = 0; i < 8; ++i) step();
  const double probe_ms =
      std::chrono::duration<double, std::milli>(Clock::now() - probe_start).count() / 8.0;
  const long inner = std::clamp<long>(
      probe_ms > 0.0 ? static_cast<long>(kTargetMs / probe_ms) : 1000000, 4, 1000000);

  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(reps));
  for (int rep = 0; rep < warmup + reps; ++rep) {
    const auto start = Clock::now();
    for (long i = 0; i < inner; ++i) step();
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (rep >= warmup) samples.push_back(ms / static_cast<double>(inner));
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  return samples.size() % 2 == 1 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

}  // namespace

int cmd_bench(const BenchOptions& opt, std::vector<BenchRecord>* records) {
  if (opt.reps < 30) throw std::invalid_argument("reps below minimum");
  if (opt.warmup < 1) throw std::invalid_argument("bench: warmup must be >= 1");
  if (opt.dims.empty()) throw std::invalid_argument("bench: no dimensions given");
  if (opt.out.empty()) throw std::invalid_argument("bench: --out required");

  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw std::runtime_error("bench: cannot open " + opt.out);
  out << "variant,n,m,classical_ms,machine_ms,overhead,reps,warmup\n";

  for (std::size_t idx = 0; idx < opt.dims.size(); ++idx) {
    const auto [n, m_req] = opt.dims[idx];
    const Eigen::Index m = opt.variant == Variant::LinearlyConstrained ? m_req : 0;
    const QpInstance inst =
        generate_baseline(n, m, opt.variant, mix_seed(opt.seed, static_cast<std::uint64_t>(idx)));
    const StepSizes steps = StepSizes::defaults(inst);
    const bool is_lc = opt.variant == Variant::LinearlyConstrained;

    // Time one update from a fixed early-trajectory state so the projection
    // and clamp paths are exercised, not the converged fast path.
    VectorXd x_bench = VectorXd::Zero(inst.n());
    VectorXd lam_bench = is_lc ? VectorXd::Zero(inst.m()) : VectorXd();
    for (int k = 0; k < 3; ++k) x_bench = classical_step(inst, steps, x_bench, &lam_bench);

    double sink = 0.0;
    const double classical_ms = time_per_step_ms(
        [&] {
          VectorXd lam = lam_bench;
          sink += classical_step(inst, steps, x_bench, &lam)[0];
        },
        opt.reps, opt.warmup);

    auto machine = build_machine(inst, steps, x_bench,
                                 is_lc ? std::optional<VectorXd>(lam_bench) : std::nullopt);
    const double machine_ms = time_per_step_ms(
        [&] {
          machine->set_x(x_bench);
          if (is_lc) machine->set_lambda(lam_bench);
          machine->apply_layer();
          sink += machine->x()[0];
        },
        opt.reps, opt.warmup);
    if (!std::isfinite(sink)) throw std::runtime_error("bench: diverged");

    BenchRecord rec;
    rec.variant = opt.variant;
    rec.n = n;
    rec.m = m;
    rec.classical_ms = classical_ms;
    rec.machine_ms = machine_ms;
    rec.overhead = machine_ms / classical_ms;
    rec.reps = opt.reps;
    rec.warmup = opt.warmup;
    if (records) records->push_back(rec);

    out << to_string(opt.variant) << ',' << n << ',' << m << ','
        << format_double(classical_ms) << ',' << format_double(machine_ms) << ','
        << format_double(rec.overhead) << ',' << opt.reps << ',' << opt.warmup << '\n';
  }
  out.close();

  nlohmann::json dims = nlohmann::json::array();
  for (const auto& [n, m] : opt.dims) dims.push_back({n, m});
  nlohmann::json args = {{"variant", std::string(to_string(opt.variant))},
                         {"dims", dims},
                         {"reps", opt.reps},
                         {"warmup", opt.warmup}};
  nlohmann::json extra = {{"cpu_model", cpu_model()}, {"reps", opt.reps}, {"warmup", opt.warmup}};
  write_manifest("bench", args, opt.seed, opt.out, {opt.out}, extra);
  return kExitOk;
}

int cmd_toy(const ToyOptions& opt) {
  if (opt.out.empty()) throw std::invalid_argument("toy: --out required");
  ToyConfig cfg;
  cfg.tau2 = opt.tau2;
  cfg.sigma2 = opt.sigma2;
  cfg.risk_aversion = opt.risk_aversion;
  cfg.sample_sizes = opt.n_grid;
  cfg.trials = opt.trials;
  cfg.seed = opt.seed;
  const ToyResult result = run_monte_carlo(cfg);

  std::ofstream out(opt.out, std::ios::binary);
  if (!out) throw std::runtime_error("toy: cannot open " + opt.out);
  out << "n,rho,regret_pto,regret_pto_se,regret_e2e,regret_e2e_se,gap,gap_se\n";
  for (const auto& row : result.per_n)
    out << row.n << ',' << format_double(row.rho) << ',' << format_double(row.regret_pto.mean)
        << ',' << format_double(row.regret_pto.se) << ',' << format_double(row.regret_e2e.mean)
        << ',' << format_double(row.regret_e2e.se) << ',' << format_double(row.gap.mean) << ','
        << format_double(row.gap.se) << '\n';
  out.close();

  nlohmann::json args = {{"tau2", opt.tau2},
                         {"sigma2", opt.sigma2},
                         {"lambda", opt.risk_aversion},
                         {"n_grid", opt.n_grid},
                         {"trials", opt.trials}};
  nlohmann::json extra = {{"chunk_size", result.chunk_size}};
  write_manifest("toy", args, opt.seed, opt.out, {opt.out}, extra);
  return kExitOk;
}

int cmd_parity(const ParityOptions& opt) {
  if (opt.draws < 1) throw std::invalid_argument("parity: draws must be >= 1");
  if (opt.n < 1 || opt.tokens < 1)
    throw std::invalid_argument("parity: n and tokens must be >= 1");

  std::ofstream csv;
  if (!opt.out.empty()) {
    csv.open(opt.out, std::ios::binary);
    if (!csv) throw std::runtime_error("parity: cannot open " + opt.out);
    csv << "draw,oddness,floor_margin\n";
  }

  double max_oddness = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (long draw = 0; draw < opt.draws; ++draw) {
    RandomStream stream(mix_seed(opt.seed, static_cast<std::uint64_t>(draw)));
    const MatrixXd x = stream.normal_matrix(opt.tokens, opt.n);
    const MatrixXd m_map = stream.normal_matrix(opt.n, opt.n);
    const MatrixXd v_map = stream.normal_matrix(opt.n, opt.n);
    const MatrixXd reducer = stream.normal_matrix(opt.n, opt.tokens);

    const double oddness = flip_oddness_check(x, m_map, v_map);
    const double target_norm = (x.transpose() * x).norm();
    const double margin = even_statistic_gap(x, m_map, v_map, reducer) - target_norm;
    max_oddness = std::max(max_oddness, oddness);
    min_margin = std::min(min_margin, margin);
    if (csv.is_open())
      csv << draw << ',' << format_double(oddness) << ',' << format_double(margin) << '\n';
  }
  if (csv.is_open()) csv.close();

  std::cout << "max_oddness_residual=" << format_double(max_oddness)
            << " min_error_floor_margin=" << format_double(min_margin) << '\n';

  if (!opt.out.empty()) {
    nlohmann::json args = {{"n", opt.n}, {"tokens", opt.tokens}, {"draws", opt.draws}};
    nlohmann::json extra = {{"max_oddness_residual", max_oddness},
                            {"min_error_floor_margin", min_margin}};
    write_manifest("parity", args, opt.seed, opt.out, {opt.out}, extra);
  }
  return (max_oddness <= 1e-12 && min_margin >= -1e-9) ? kExitOk : kExitValidation;
}

}  // namespace qpemu
