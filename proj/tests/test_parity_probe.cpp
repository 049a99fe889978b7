#include <doctest.h>

#include <random>

#include "qpemu/parity_probe.hpp"

using namespace qpemu;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(std::mt19937_64& eng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(eng);
  return m;
}

// Direct double-loop evaluation o_j = sum_i (x_j' M x_i) V x_i.
MatrixXd double_loop_attention(const MatrixXd& x, const MatrixXd& m_map, const MatrixXd& v_map) {
  MatrixXd out = MatrixXd::Zero(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.rows(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double w = x.row(j) * m_map * x.row(i).transpose();
      out.row(j) += w * (v_map * x.row(i).transpose()).transpose();
    }
  return out;
}

}  // namespace

TEST_CASE("single token with identity maps") {
  MatrixXd x(1, 3);
  x << 1, 2, 3;
  const MatrixXd id = MatrixXd::Identity(3, 3);
  const MatrixXd o = pure_data_attention(x, id, id);
  const double norm2 = x.row(0).squaredNorm();
  CHECK((o.row(0).transpose() - norm2 * x.row(0).transpose()).cwiseAbs().maxCoeff() <= 1e-12);

  MatrixXd scalar(1, 1);
  scalar << 2;
  const MatrixXd one = MatrixXd::Identity(1, 1);
  CHECK(pure_data_attention(scalar, one, one)(0, 0) == 8.0);
  CHECK(pure_data_attention(-scalar, one, one)(0, 0) == -8.0);
}

TEST_CASE("closed form matches the double loop") {
  std::mt19937_64 eng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd x = random_matrix(eng, 8, 4);
    const MatrixXd m_map = random_matrix(eng, 4, 4);
    const MatrixXd v_map = random_matrix(eng, 4, 4);
    const MatrixXd closed = pure_data_attention(x, m_map, v_map);
    const MatrixXd loop = double_loop_attention(x, m_map, v_map);
    CHECK((closed - loop).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, loop.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("global flip negates the output exactly") {
  std::mt19937_64 eng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index tokens = 1 + static_cast<Eigen::Index>(eng() % 16);
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(eng() % 8);
    const MatrixXd x = random_matrix(eng, tokens, n);
    const MatrixXd m_map = random_matrix(eng, n, n);
    const MatrixXd v_map = random_matrix(eng, n, n);
    CHECK(flip_oddness_check(x, m_map, v_map) <= 1e-12);
  }
  CHECK(flip_oddness_check(MatrixXd::Zero(3, 2), MatrixXd::Identity(2, 2),
                           MatrixXd::Identity(2, 2)) == 0.0);
}

TEST_CASE("error floor for linear reducers") {
  std::mt19937_64 eng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index tokens = 2 + static_cast<Eigen::Index>(eng() % 15);
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(eng() % 7);
    const MatrixXd x = random_matrix(eng, tokens, n);
    const MatrixXd m_map = random_matrix(eng, n, n);
    const MatrixXd v_map = random_matrix(eng, n, n);
    const double target_norm = (x.transpose() * x).norm();
    for (int r = 0; r < 100; ++r) {
      const MatrixXd reducer = random_matrix(eng, n, tokens);
      CHECK(even_statistic_gap(x, m_map, v_map, reducer) >= target_norm - 1e-9);
    }
  }
}

TEST_CASE("zero reducer and zero data degenerate cases") {
  std::mt19937_64 eng(8);
  const MatrixXd x = random_matrix(eng, 5, 3);
  const MatrixXd m_map = random_matrix(eng, 3, 3);
  const MatrixXd v_map = random_matrix(eng, 3, 3);
  const double target_norm = (x.transpose() * x).norm();
  CHECK(even_statistic_gap(x, m_map, v_map, MatrixXd::Zero(3, 5)) == target_norm);

  const MatrixXd zero = MatrixXd::Zero(5, 3);
  CHECK(even_statistic_gap(zero, m_map, v_map, MatrixXd::Zero(3, 5)) == 0.0);
}

TEST_CASE("cubic homogeneity in the data") {
  std::mt19937_64 eng(13);
  const MatrixXd x = random_matrix(eng, 6, 4);
  const MatrixXd m_map = random_matrix(eng, 4, 4);
  const MatrixXd v_map = random_matrix(eng, 4, 4);
  const MatrixXd base = pure_data_attention(x, m_map, v_map);
  for (double t : {2.0, -1.0, 0.5}) {
    const MatrixXd scaled = pure_data_attention((t * x).eval(), m_map, v_map);
    const MatrixXd expected = t * t * t * base;
    CHECK((scaled - expected).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("dimension validation") {
  const MatrixXd x = MatrixXd::Zero(3, 4);
  CHECK_THROWS_AS(pure_data_attention(x, MatrixXd::Zero(3, 3), MatrixXd::Zero(4, 4)),
                  std::invalid_argument);
  CHECK_THROWS_AS(even_statistic_gap(x, MatrixXd::Zero(4, 4), MatrixXd::Zero(4, 4),
                                     MatrixXd::Zero(3, 3)),
                  std::invalid_argument);
}
