#pragma once

#include <Eigen/Dense>

namespace qpemu {

/// Linear attention over pure data tokens (no IDs, no constant channel):
/// with M = W_Q W_K' and V = W_V, row j of the output is
///   o_j = [ sum_i (V x_i) x_i' ] M' x_j,
/// linear in x_j and quadratic in the dataset, hence odd under X -> -X.
Eigen::MatrixXd pure_data_attention(const Eigen::MatrixXd& x_rows, const Eigen::MatrixXd& m_map,
                                    const Eigen::MatrixXd& v_map);

/// |o(X) + o(-X)|_inf; zero up to sign-exact floating point.
double flip_oddness_check(const Eigen::MatrixXd& x_rows, const Eigen::MatrixXd& m_map,
                          const Eigen::MatrixXd& v_map);

/// Distance of any linear readout of the layer output from the (even)
/// second-moment target T(X) = sum_i x_i x_i', averaged over the two signs:
///   1/2 (|T - R o(X)|_F + |T - R o(-X)|_F) >= |T|_F
/// by the triangle inequality, since R o(-X) = -R o(X). The reducer is an
/// n x N matrix applied from the left to the stacked N x n output.
double even_statistic_gap(const Eigen::MatrixXd& x_rows, const Eigen::MatrixXd& m_map,
                          const Eigen::MatrixXd& v_map, const Eigen::MatrixXd& reducer);

}  // namespace qpemu
