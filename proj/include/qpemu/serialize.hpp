#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpemu/qp_core.hpp"

namespace qpemu {

/// Shortest round-trippable decimal representation (std::to_chars).
std::string format_double(double v);

/// Instance JSON schema:
///   {"variant": "U"|"LC"|"R"|"C", "n": int, "m": int, "A": [[f64]],
///    "b": [f64], "C": [[f64]]?, "d": [f64]?, "l1_weight": f64?,
///    "l1_budget": f64?, "seed": u64?, "rng": string?}
/// Round-trips are bit-exact for finite doubles.
nlohmann::json instance_to_json(const QpInstance& inst);
QpInstance instance_from_json(const nlohmann::json& j);

/// Newline-delimited JSON dataset, one instance per line.
void write_dataset(const std::string& path, const std::vector<QpInstance>& instances);
std::vector<QpInstance> read_dataset(const std::string& path);

/// Solution record for companion files: {"x": [f64], "lambda": [f64]?,
/// "objective": f64, "residual": f64, "iterations": int, "converged": bool}.
nlohmann::json solution_to_json(const SolverTrace& trace);

/// Trace CSV: header "iter,objective,residual,x_0..x_{n-1}[,lam_0..][,impl]",
/// one row per recorded iterate. The impl column ("classical"/"machine") is
/// emitted when impl is nonempty.
void trace_to_csv(const SolverTrace& trace, std::ostream& out, const std::string& impl = "");

}  // namespace qpemu
