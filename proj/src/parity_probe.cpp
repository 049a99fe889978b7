#include "qpemu/parity_probe.hpp"

#include <stdexcept>

namespace qpemu {

using Eigen::MatrixXd;

namespace {

void check_dims(const MatrixXd& x_rows, const MatrixXd& m_map, const MatrixXd& v_map) {
  const Eigen::Index n = x_rows.cols();
  if (m_map.rows() != n || m_map.cols() != n || v_map.rows() != n || v_map.cols() != n)
    throw std::invalid_argument("pure_data_attention: maps must be n x n");
}

}  // namespace

MatrixXd pure_data_attention(const MatrixXd& x_rows, const MatrixXd& m_map,
                             const MatrixXd& v_map) {
  check_dims(x_rows, m_map, v_map);
  // S_V = sum_i (V x_i) x_i' = V (X'X); row j of the output is (S_V M' x_j)'.
  const MatrixXd sketch = v_map * (x_rows.transpose() * x_rows);
  return x_rows * m_map * sketch.transpose();
}

double flip_oddness_check(const MatrixXd& x_rows, const MatrixXd& m_map,
                          const MatrixXd& v_map) {
  const MatrixXd sum = pure_data_attention(x_rows, m_map, v_map) +
                       pure_data_attention(-x_rows, m_map, v_map);
  return sum.size() == 0 ? 0.0 : sum.cwiseAbs().maxCoeff();
}

double even_statistic_gap(const MatrixXd& x_rows, const MatrixXd& m_map, const MatrixXd& v_map,
                          const MatrixXd& reducer) {
  if (reducer.rows() != x_rows.cols() || reducer.cols() != x_rows.rows())
    throw std::invalid_argument("even_statistic_gap: reducer must be n x N");
  const MatrixXd target = x_rows.transpose() * x_rows;
  const MatrixXd pos = reducer * pure_data_attention(x_rows, m_map, v_map);
  const MatrixXd neg = reducer * pure_data_attention(-x_rows, m_map, v_map);
  return 0.5 * ((target - pos).norm() + (target - neg).norm());
}

}  // namespace qpemu
