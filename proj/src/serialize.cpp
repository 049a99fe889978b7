#include "qpemu/serialize.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <system_error>

namespace qpemu {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc())
    throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, res.ptr);
}

namespace {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected nonempty array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("ragged matrix rows");
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

VectorXd vector_from_json(const nlohmann::json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

}  // namespace

nlohmann::json instance_to_json(const QpInstance& inst) {
  nlohmann::json j;
  j["variant"] = std::string(to_string(inst.variant()));
  j["n"] = inst.n();
  j["m"] = inst.m();
  j["A"] = matrix_to_json(inst.a_matrix());
  j["b"] = vector_to_json(inst.b_vec());
  switch (inst.variant()) {
    case Variant::LinearlyConstrained:
      j["C"] = matrix_to_json(inst.c_matrix());
      j["d"] = vector_to_json(inst.d_vec());
      break;
    case Variant::L1Regularized:
      j["l1_weight"] = inst.l1_weight();
      break;
    case Variant::L1Constrained:
      j["l1_budget"] = inst.l1_budget();
      break;
    case Variant::Unconstrained:
      break;
  }
  if (inst.seed()) j["seed"] = *inst.seed();
  if (!inst.rng_name().empty()) j["rng"] = inst.rng_name();
  return j;
}

QpInstance instance_from_json(const nlohmann::json& j) {
  const Variant variant = variant_from_string(j.at("variant").get<std::string>());
  MatrixXd a = matrix_from_json(j.at("A"));
  VectorXd b = vector_from_json(j.at("b"));
  const auto n = j.at("n").get<Eigen::Index>();
  const auto m = j.at("m").get<Eigen::Index>();
  if (a.rows() != n || b.size() != n)
    throw std::invalid_argument("instance_from_json: n does not match A/b");
  std::optional<std::uint64_t> seed;
  if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();

  QpInstance inst = [&]() {
    switch (variant) {
      case Variant::Unconstrained:
        return QpInstance::unconstrained(std::move(a), std::move(b), seed);
      case Variant::LinearlyConstrained: {
        MatrixXd c = matrix_from_json(j.at("C"));
        VectorXd d = vector_from_json(j.at("d"));
        if (c.rows() != m || d.size() != m)
          throw std::invalid_argument("instance_from_json: m does not match C/d");
        return QpInstance::linearly_constrained(std::move(a), std::move(b), std::move(c),
                                                std::move(d), seed);
      }
      case Variant::L1Regularized:
        return QpInstance::l1_regularized(std::move(a), std::move(b),
                                          j.at("l1_weight").get<double>(), seed);
      case Variant::L1Constrained:
        return QpInstance::l1_constrained(std::move(a), std::move(b),
                                          j.at("l1_budget").get<double>(), seed);
    }
    throw std::invalid_argument("instance_from_json: unknown variant");
  }();
  if (j.contains("rng")) inst.set_rng_name(j.at("rng").get<std::string>());
  return inst;
}

void write_dataset(const std::string& path, const std::vector<QpInstance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path);
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
  if (!out) throw std::runtime_error("write_dataset: write failed for " + path);
}

std::vector<QpInstance> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path);
  std::vector<QpInstance> instances;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    instances.push_back(instance_from_json(nlohmann::json::parse(line)));
  }
  return instances;
}

nlohmann::json solution_to_json(const SolverTrace& trace) {
  if (trace.iterates.empty()) throw std::invalid_argument("solution_to_json: empty trace");
  nlohmann::json j;
  j["x"] = vector_to_json(trace.iterates.back());
  if (trace.duals && !trace.duals->empty()) j["lambda"] = vector_to_json(trace.duals->back());
  j["objective"] = trace.objectives.back();
  j["residual"] = trace.residuals.back();
  j["iterations"] = trace.iterations;
  j["converged"] = trace.converged;
  return j;
}

void trace_to_csv(const SolverTrace& trace, std::ostream& out, const std::string& impl) {
  if (trace.iterates.empty()) throw std::invalid_argument("trace_to_csv: empty trace");
  const Eigen::Index n = trace.iterates.front().size();
  const Eigen::Index m = trace.duals ? trace.duals->front().size() : 0;

  out << "iter,objective,residual";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",lam_" << i;
  if (!impl.empty()) out << ",impl";
  out << '\n';

  // If the trace was not fully recorded, the single stored row is the final
  // iterate; label it with the true iteration index.
  const bool full = trace.iterates.size() == trace.iterations + 1;
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const std::size_t iter = full ? k : trace.iterations;
    out << iter << ',' << format_double(trace.objectives[k]) << ','
        << format_double(trace.residuals[k]);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(trace.iterates[k][i]);
    if (trace.duals)
      for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_double((*trace.duals)[k][i]);
    if (!impl.empty()) out << ',' << impl;
    out << '\n';
  }
}

}  // namespace qpemu
