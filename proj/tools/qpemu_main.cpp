// Command-line front door: instance generation, solving, machine emulation,
// trajectory comparison, per-step benchmarking, the two-asset toy model, and
// the parity probe. Every command writes its artifacts under --out plus a
// <out>.manifest.json with checksums.

#include <CLI11.hpp>

#include <iostream>

#include "qpemu/experiment_cli.hpp"

namespace {

std::vector<std::pair<Eigen::Index, Eigen::Index>> parse_dims(const std::vector<std::string>& raw) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> dims;
  for (const auto& item : raw) {
    const auto cross = item.find('x');
    if (cross == std::string::npos) {
      dims.emplace_back(std::stol(item), 0);
    } else {
      dims.emplace_back(std::stol(item.substr(0, cross)), std::stol(item.substr(cross + 1)));
    }
  }
  return dims;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Side-by-side classical QP solvers and their fixed-weight linear-attention "
               "emulators"};
  app.require_subcommand(1);

  std::string variant_str = "LC";
  auto add_variant = [&](CLI::App* cmd) {
    cmd->add_option("--variant", variant_str, "problem class: U, LC, R, or C");
  };

  qpemu::GenOptions gen;
  double kappa_low = 0.0, kappa_high = 0.0;
  auto* cmd_gen = app.add_subcommand("gen", "generate a random-instance dataset");
  add_variant(cmd_gen);
  cmd_gen->add_option("--n", gen.n, "primal dimension");
  cmd_gen->add_option("--m", gen.m, "constraint rows (LC only)");
  cmd_gen->add_option("--count", gen.count, "number of instances");
  cmd_gen->add_option("--seed", gen.seed, "base seed");
  cmd_gen->add_option("--kappa-low", kappa_low, "condition-number range low end");
  cmd_gen->add_option("--kappa-high", kappa_high, "condition-number range high end");
  cmd_gen->add_option("--out", gen.out, "dataset path (ndjson)")->required();
  cmd_gen->add_option("--solutions-out", gen.solutions_out,
                      "companion solutions path (default <out>.solutions)");
  cmd_gen->add_option("--tokens-out", gen.tokens_out, "token-sequence path (LC only)");

  qpemu::SolveOptions solve;
  auto* cmd_solve = app.add_subcommand("solve", "run the classical solver on one instance");
  cmd_solve->add_option("--in", solve.in, "dataset path")->required();
  cmd_solve->add_option("--index", solve.index, "line number in the dataset");
  cmd_solve->add_option("--tol", solve.tol, "residual stopping tolerance");
  cmd_solve->add_option("--max-iters", solve.max_iters, "iteration cap");
  cmd_solve->add_option("--seed", solve.seed, "seed (recorded in the manifest)");
  cmd_solve->add_option("--out", solve.out, "solution JSON path")->required();
  cmd_solve->add_option("--trace-out", solve.trace_out, "optional trace CSV path");

  qpemu::SolveOptions emu;
  auto* cmd_emu = app.add_subcommand("emulate", "run the attention machine on one instance");
  cmd_emu->add_option("--in", emu.in, "dataset path")->required();
  cmd_emu->add_option("--index", emu.index, "line number in the dataset");
  cmd_emu->add_option("--tol", emu.tol, "residual stopping tolerance");
  cmd_emu->add_option("--max-iters", emu.max_iters, "layer cap");
  cmd_emu->add_option("--seed", emu.seed, "seed (recorded in the manifest)");
  cmd_emu->add_option("--out", emu.out, "solution JSON path")->required();
  cmd_emu->add_option("--trace-out", emu.trace_out, "optional trace CSV path");

  qpemu::CompareOptions compare;
  auto* cmd_compare =
      app.add_subcommand("compare", "classical vs machine trajectories, per-layer gap");
  cmd_compare->add_option("--dataset", compare.dataset, "dataset path")->required();
  add_variant(cmd_compare);
  cmd_compare->add_option("--layers", compare.layers, "layers / iterations to compare");
  cmd_compare->add_option("--seed", compare.seed, "seed (recorded in the manifest)");
  cmd_compare->add_option("--out", compare.out, "comparison CSV path")->required();

  qpemu::BenchOptions bench;
  std::vector<std::string> dims_raw = {"16", "32", "64", "128"};
  auto* cmd_bench = app.add_subcommand("bench", "per-step wall time, classical vs machine");
  add_variant(cmd_bench);
  cmd_bench->add_option("--dims", dims_raw, "sizes, e.g. 16 32 or 16x8 32x16 for LC");
  cmd_bench->add_option("--reps", bench.reps, "timing repetitions (>= 30)");
  cmd_bench->add_option("--warmup", bench.warmup, "warmup repetitions to discard");
  cmd_bench->add_option("--seed", bench.seed, "instance seed");
  cmd_bench->add_option("--out", bench.out, "bench CSV path")->required();

  qpemu::ToyOptions toy;
  auto* cmd_toy = app.add_subcommand("toy", "two-asset decision toy model Monte Carlo");
  cmd_toy->add_option("--tau2", toy.tau2, "prior variance of the mean gap");
  cmd_toy->add_option("--sigma2", toy.sigma2, "per-asset return variance");
  cmd_toy->add_option("--lambda", toy.risk_aversion, "risk aversion");
  cmd_toy->add_option("--n-grid", toy.n_grid, "sample sizes");
  cmd_toy->add_option("--trials", toy.trials, "Monte Carlo repetitions");
  cmd_toy->add_option("--seed", toy.seed, "seed");
  cmd_toy->add_option("--out", toy.out, "result CSV path")->required();

  qpemu::ParityOptions parity;
  auto* cmd_parity = app.add_subcommand("parity", "pure-data linear attention oddness probe");
  cmd_parity->add_option("--n", parity.n, "token dimension");
  cmd_parity->add_option("--tokens", parity.tokens, "tokens per draw");
  cmd_parity->add_option("--draws", parity.draws, "random draws");
  cmd_parity->add_option("--seed", parity.seed, "seed");
  cmd_parity->add_option("--out", parity.out, "optional per-draw CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_gen->parsed()) {
      gen.variant = qpemu::variant_from_string(variant_str);
      if (kappa_low > 0.0 || kappa_high > 0.0) gen.kappa_range = {kappa_low, kappa_high};
      return qpemu::cmd_gen(gen);
    }
    if (cmd_solve->parsed()) return qpemu::cmd_solve(solve);
    if (cmd_emu->parsed()) return qpemu::cmd_emulate(emu);
    if (cmd_compare->parsed()) {
      compare.variant = qpemu::variant_from_string(variant_str);
      return qpemu::cmd_compare(compare);
    }
    if (cmd_bench->parsed()) {
      bench.variant = qpemu::variant_from_string(variant_str);
      bench.dims = parse_dims(dims_raw);
      return qpemu::cmd_bench(bench);
    }
    if (cmd_toy->parsed()) return qpemu::cmd_toy(toy);
    if (cmd_parity->parsed()) return qpemu::cmd_parity(parity);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qpemu::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qpemu::kExitOperational;
  }
  return qpemu::kExitOperational;
}
