#include <doctest.h>

#include <cstring>
#include <random>

#include "qpemu/attention_machine.hpp"
#include "qpemu/instance_factory.hpp"
#include "qpemu/reference_solvers.hpp"

using namespace qpemu;

namespace {

QpInstance u_toy() {
  MatrixXd a(2, 2);
  a << 2, 0, 0, 2;
  VectorXd b(2);
  b << -2, -2;
  return QpInstance::unconstrained(a, b);
}

QpInstance r_toy() {
  MatrixXd a = MatrixXd::Identity(2, 2);
  VectorXd b(2);
  b << -2, 0;
  return QpInstance::l1_regularized(a, b, 0.5);
}

QpInstance lc_toy() {
  MatrixXd a = MatrixXd::Identity(2, 2);
  VectorXd b(2);
  b << -2, -2;
  MatrixXd c(1, 2);
  c << 1, 1;
  VectorXd d(1);
  d << 2;
  return QpInstance::linearly_constrained(a, b, c, d);
}

QpInstance c_toy() {
  MatrixXd a = MatrixXd::Identity(2, 2);
  VectorXd b(2);
  b << -2, -2;
  return QpInstance::l1_constrained(a, b, 1.0);
}

// The unconstrained selector head, materialized the same way the machine
// builds it: W_Q = W_K = [E' S'], W_V = R'.
LinearAttentionHead u_head(Eigen::Index n) {
  const Eigen::Index width = 2 * n + 1;
  LinearAttentionHead head;
  head.w_q = MatrixXd::Zero(width, n + 1);
  head.w_q.topLeftCorner(n, n) = MatrixXd::Identity(n, n);
  head.w_q(2 * n, n) = 1.0;
  head.w_k = head.w_q;
  head.w_v = MatrixXd::Zero(width, n);
  head.w_v.block(n, 0, n, n) = MatrixXd::Identity(n, n);
  return head;
}

MatrixXd random_matrix(std::mt19937_64& eng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(eng);
  return m;
}

}  // namespace

TEST_CASE("token layouts match the constructions row for row") {
  const QpInstance u = generate_baseline(3, 0, Variant::Unconstrained, 15);
  VectorXd x0(3);
  x0 << 0.1, -0.2, 0.3;
  const TokenStateU su = TokenStateU::build(u, 0.1, x0);
  REQUIRE(su.tokens.rows() == 5);
  REQUIRE(su.tokens.cols() == 7);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(su.tokens.row(i).head(3).transpose() == u.a_matrix().row(i).transpose());
    for (Eigen::Index j = 0; j < 3; ++j)
      CHECK(su.tokens(i, 3 + j) == (i == j ? 1.0 : 0.0));
    CHECK(su.tokens(i, 6) == 0.0);
  }
  CHECK(su.tokens.row(3).head(3) == Eigen::RowVector3d::Zero());
  CHECK(su.tokens.row(3).segment(3, 3).transpose() == u.b_vec());
  CHECK(su.tokens(3, 6) == 1.0);
  CHECK(su.tokens.row(4).head(3).transpose() == x0);
  CHECK(su.tokens.row(4).segment(3, 3) == Eigen::RowVector3d::Zero());
  CHECK(su.tokens(4, 6) == 1.0);

  const QpInstance lc = generate_baseline(3, 2, Variant::LinearlyConstrained, 15);
  VectorXd lam0(2);
  lam0 << 0.5, 0.0;
  const TokenStateLC slc = TokenStateLC::build(lc, 0.1, 0.1, x0, lam0);
  REQUIRE(slc.tokens.rows() == 7);
  REQUIRE(slc.tokens.cols() == 9);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(slc.tokens.row(i).head(3).transpose() == lc.a_matrix().row(i).transpose());
    CHECK(slc.tokens(i, 3 + i) == 1.0);
    CHECK(slc.tokens(i, 8) == lc.b_vec()[i]);
  }
  for (Eigen::Index i = 0; i < 2; ++i) {
    CHECK(slc.tokens.row(3 + i).head(3).transpose() == lc.c_matrix().row(i).transpose());
    CHECK(slc.tokens(3 + i, 6 + i) == 1.0);
    CHECK(slc.tokens(3 + i, 8) == -lc.d_vec()[i]);
  }
  CHECK(slc.tokens.row(5).head(3).transpose() == x0);
  CHECK(slc.tokens(5, 8) == 1.0);
  CHECK(slc.tokens.row(6).segment(6, 2).transpose() == lam0);
  CHECK(slc.tokens(6, 8) == 1.0);

  // The dual slice must be nonnegative at construction.
  VectorXd bad(2);
  bad << -0.1, 0.0;
  CHECK_THROWS_AS(TokenStateLC::build(lc, 0.1, 0.1, x0, bad), std::invalid_argument);
}

TEST_CASE("head_apply recovers the gradient on the U layout") {
  const QpInstance inst = u_toy();
  const double gamma = 0.25;
  TokenStateU state = TokenStateU::build(inst, gamma, VectorXd::Zero(2));
  const LinearAttentionHead head = u_head(2);
  VectorXd o = head_apply(head, state.tokens, 3);
  const VectorXd direct = inst.a_matrix() * VectorXd::Zero(2) + inst.b_vec();
  CHECK(o == direct);

  VectorXd x_opt(2);
  x_opt << 1, 1;
  state = TokenStateU::build(inst, gamma, x_opt);
  o = head_apply(head, state.tokens, 3);
  CHECK(o.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("head_apply with identity maps on a single token") {
  MatrixXd tokens(1, 3);
  tokens << 1, 2, 3;
  LinearAttentionHead head;
  head.w_q = head.w_k = head.w_v = MatrixXd::Identity(3, 3);
  const VectorXd o = head_apply(head, tokens, 0);
  const double scale = tokens.row(0).squaredNorm();
  CHECK(o == (scale * tokens.row(0).transpose()).eval());
}

TEST_CASE("head_apply validates dimensions") {
  MatrixXd tokens = MatrixXd::Zero(2, 3);
  LinearAttentionHead head;
  head.w_q = head.w_k = head.w_v = MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(head_apply(head, tokens, 0), std::invalid_argument);
}

TEST_CASE("head bilinearity against a direct double loop") {
  std::mt19937_64 eng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index rows = 2 + static_cast<Eigen::Index>(eng() % 6);
    const Eigen::Index width = 3 + static_cast<Eigen::Index>(eng() % 5);
    const Eigen::Index dq = 1 + static_cast<Eigen::Index>(eng() % 4);
    const Eigen::Index dv = 1 + static_cast<Eigen::Index>(eng() % 4);
    MatrixXd tokens = random_matrix(eng, rows, width);
    LinearAttentionHead head;
    head.w_q = random_matrix(eng, width, dq);
    head.w_k = random_matrix(eng, width, dq);
    head.w_v = random_matrix(eng, width, dv);

    const VectorXd o = head_apply(head, tokens, 0);
    VectorXd naive = VectorXd::Zero(dv);
    const Eigen::RowVectorXd q = tokens.row(0) * head.w_q;
    for (Eigen::Index t = 0; t < rows; ++t) {
      double w = 0.0;
      for (Eigen::Index j = 0; j < dq; ++j) w += q[j] * (tokens.row(t) * head.w_k)[j];
      naive += w * (tokens.row(t) * head.w_v).transpose();
    }
    CHECK((o - naive).cwiseAbs().maxCoeff() <= 1e-13 * std::max(1.0, naive.cwiseAbs().maxCoeff()));

    // Scaling every token by 2 scales the output by 8 (exact power of two).
    const VectorXd o_scaled = head_apply(head, (2.0 * tokens).eval(), 0);
    CHECK((o_scaled - 8.0 * o).cwiseAbs().maxCoeff() <=
          1e-13 * std::max(1.0, o.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("query row self-contribution is exactly zero") {
  const QpInstance inst = generate_baseline(4, 0, Variant::Unconstrained, 9);
  TokenStateU state = TokenStateU::build(inst, 0.1, VectorXd::Ones(4));
  const LinearAttentionHead head = u_head(4);
  const VectorXd with_self = head_apply(head, state.tokens, 5);
  const VectorXd without_self = head_apply(head, state.tokens, 5, 0, 5);
  CHECK(with_self == without_self);
}

TEST_CASE("u machine layer equals gd_step exactly") {
  const QpInstance inst = u_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 0.25;
  auto machine = build_u_machine(inst, steps, VectorXd::Zero(2));
  machine->apply_layer();
  const VectorXd expected = gd_step(inst, steps, VectorXd::Zero(2));
  CHECK(machine->x() == expected);
  CHECK(machine->x()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("u machine matches the reference trajectory over 200 layers") {
  const QpInstance inst = generate_baseline(5, 0, Variant::Unconstrained, 77);
  const StepSizes steps = StepSizes::defaults(inst);
  auto machine = build_u_machine(inst, steps, VectorXd::Zero(5));
  VectorXd x = VectorXd::Zero(5);
  for (int k = 0; k < 200; ++k) {
    machine->apply_layer();
    x = gd_step(inst, steps, x);
    CHECK((machine->x() - x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("machine construction rejects invalid step sizes") {
  const QpInstance inst = u_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 0.0;
  CHECK_THROWS_AS(build_u_machine(inst, steps, VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("machine layer equals the public head_apply route") {
  const QpInstance inst = generate_baseline(4, 0, Variant::Unconstrained, 13);
  const StepSizes steps = StepSizes::defaults(inst);
  VectorXd x = VectorXd::Ones(4) * 0.3;
  auto machine = build_u_machine(inst, steps, x);
  const LinearAttentionHead head = u_head(4);
  const VectorXd o = head_apply(head, machine->tokens(), 5);
  const VectorXd expected = x - steps.gamma * o;
  machine->apply_layer();
  CHECK(machine->x() == expected);
}

TEST_CASE("lc machine is the identity at the KKT point") {
  const QpInstance inst = lc_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 0.5;
  steps.eta = 0.5;
  VectorXd x(2), lam(1);
  x << 1, 1;
  lam << 1;
  auto machine = build_lc_machine(inst, steps, x, lam);
  machine->apply_layer();
  CHECK((machine->x() - x).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((*machine->lambda() - lam).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("lc machine matches the hand step from zero") {
  const QpInstance inst = lc_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 0.5;
  steps.eta = 0.5;
  auto machine = build_lc_machine(inst, steps, VectorXd::Zero(2), VectorXd::Zero(1));
  machine->apply_layer();
  CHECK(machine->x()[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(machine->x()[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((*machine->lambda())[0] == 0.0);
}

TEST_CASE("lc machine tracks arrow_hurwicz over 50k layers") {
  const QpInstance inst = generate_baseline(5, 3, Variant::LinearlyConstrained, 11);
  const StepSizes steps = StepSizes::defaults(inst);
  auto machine = build_lc_machine(inst, steps, VectorXd::Zero(5), VectorXd::Zero(3));
  VectorXd x = VectorXd::Zero(5);
  VectorXd lam = VectorXd::Zero(3);
  double max_gap = 0.0;
  for (int k = 0; k < 50000; ++k) {
    machine->apply_layer();
    auto [xn, ln] = arrow_hurwicz_step(inst, steps, x, lam);
    x = std::move(xn);
    lam = std::move(ln);
    max_gap = std::max(max_gap, (machine->x() - x).cwiseAbs().maxCoeff());
    max_gap = std::max(max_gap, (*machine->lambda() - lam).cwiseAbs().maxCoeff());
  }
  CHECK(max_gap <= 1e-10);
  CHECK(evaluate_residual(inst, x, lam) <= 1e-6);
}

TEST_CASE("the dual token's constant channel would leak lambda into the feedback head") {
  // The feedback head's key map pairs the query's constant slot with every
  // token's constant channel. Over the data and x rows the sum is exactly
  // Cx - d; adding the dual row shifts it by exactly lambda, which is why
  // the machine's feedback head excludes that row.
  const QpInstance inst = generate_baseline(4, 2, Variant::LinearlyConstrained, 21);
  VectorXd x = VectorXd::Ones(4) * 0.2;
  VectorXd lam(2);
  lam << 0.7, 1.3;
  TokenStateLC state = TokenStateLC::build(inst, 0.01, 0.01, x, lam);

  const Eigen::Index n = 4, m = 2, width = 2 * n + m + 1;
  LinearAttentionHead fb;
  fb.w_q = MatrixXd::Zero(width, n + 1);
  fb.w_q.topLeftCorner(n, n) = MatrixXd::Identity(n, n);
  fb.w_q(width - 1, n) = 1.0;
  fb.w_k = fb.w_q;
  fb.w_v = MatrixXd::Zero(width, m);
  fb.w_v.block(2 * n, 0, m, m) = MatrixXd::Identity(m, m);

  const VectorXd masked = head_apply(fb, state.tokens, n + m, 0, n + m + 1);
  const VectorXd full = head_apply(fb, state.tokens, n + m);
  const VectorXd cxd = inst.c_matrix() * x - inst.d_vec();
  CHECK((masked - cxd).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((full - (cxd + lam)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("soft-threshold ffn equals the reference map exactly") {
  const SoftThresholdFfn ffn = SoftThresholdFfn::make(3, 0.5);
  VectorXd y(3);
  y << 2, -0.3, 0.5;
  const VectorXd out = ffn.apply(y);
  CHECK(out[0] == 1.5);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  std::mt19937_64 eng(4);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd z(7);
    for (Eigen::Index i = 0; i < 7; ++i) z[i] = 3.0 * normal(eng);
    const double theta = unif(eng);
    const SoftThresholdFfn f = SoftThresholdFfn::make(7, theta);
    CHECK(f.apply(z) == soft_threshold(z, theta));

    // Structured application agrees with the materialized weights.
    const VectorXd dense =
        f.w2 * (f.w1 * z - theta * VectorXd::Ones(14)).cwiseMax(0.0);
    CHECK((f.apply(z) - dense).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("r machine one-shot example and trajectory") {
  const QpInstance inst = r_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 1.0;
  auto machine = build_r_machine(inst, steps, VectorXd::Zero(2));
  machine->apply_layer();
  CHECK(machine->x()[0] == 1.5);
  CHECK(machine->x()[1] == 0.0);

  const QpInstance rnd = generate_baseline(5, 0, Variant::L1Regularized, 88);
  const StepSizes s = StepSizes::defaults(rnd);
  auto m2 = build_r_machine(rnd, s, VectorXd::Zero(5));
  VectorXd x = VectorXd::Zero(5);
  for (int k = 0; k < 500; ++k) {
    m2->apply_layer();
    x = ista_step(rnd, s, x);
    CHECK((m2->x() - x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("threshold_loop examples against the sort oracle") {
  VectorXd y(2);
  y << 0.3, -0.2;
  auto res = threshold_loop(y, 1.0, 0.5);
  CHECK(res.theta_star == 0.0);
  CHECK(res.x == y);
  CHECK(res.inner_iters == 0);

  y << 2, 2;
  res = threshold_loop(y, 1.0, 0.5, 100000, 1e-10);
  CHECK((res.x - project_l1_ball_sort(y, 1.0)).cwiseAbs().maxCoeff() <= 1e-8);

  y << 3, 1;
  res = threshold_loop(y, 2.0, 0.5);
  CHECK((res.x - project_l1_ball_sort(y, 2.0)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("threshold_loop excess is monotone and contracts on fixed active sets") {
  std::mt19937_64 eng(6);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.2, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(eng() % 15);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = 2.0 * normal(eng);
    const double budget = unif(eng);
    const double eta = 1.0 / static_cast<double>(n);
    std::vector<std::pair<double, double>> log;
    const auto res = threshold_loop(y, budget, eta, 100000, 1e-12, &log);
    CHECK((res.x - project_l1_ball_sort(y, budget)).cwiseAbs().maxCoeff() <= 1e-8);

    auto active_count = [&](double theta) {
      Eigen::Index count = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(y[i]) > theta) ++count;
      return count;
    };
    for (std::size_t t = 0; t + 1 < log.size(); ++t) {
      CHECK(log[t + 1].second <= log[t].second);
      const Eigen::Index act_now = active_count(log[t].first);
      const Eigen::Index act_next = active_count(log[t + 1].first);
      if (act_now == act_next && act_now >= 1) {
        const double factor = 1.0 - static_cast<double>(act_now) * eta;
        CHECK(log[t + 1].second <= factor * log[t].second + 1e-12);
      }
    }
  }
}

TEST_CASE("threshold_loop reports its state when the cap is exhausted") {
  VectorXd y(2);
  y << 10, 10;
  try {
    threshold_loop(y, 1.0, 0.01, 3, 1e-14);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.estimate > 0.0);
    CHECK(e.residual > 1e-14);
  }
}

TEST_CASE("threshold_loop validates eta") {
  VectorXd y(4);
  y << 1, 2, 3, 4;
  CHECK_THROWS_AS(threshold_loop(y, 1.0, 0.3), std::invalid_argument);  // 0.3 > 1/4
  CHECK_THROWS_AS(threshold_loop(y, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("c machine examples and trajectory vs pgd") {
  const QpInstance inst = c_toy();
  StepSizes steps = StepSizes::defaults(inst);
  steps.gamma = 1.0;
  steps.eta = 0.5;
  auto machine = build_c_machine(inst, steps, VectorXd::Zero(2));
  machine->apply_layer();
  VectorXd expected(2);
  expected << 0.5, 0.5;
  CHECK((machine->x() - expected).cwiseAbs().maxCoeff() <= 1e-8);
  machine->set_x(expected);
  machine->apply_layer();
  CHECK((machine->x() - expected).cwiseAbs().maxCoeff() <= 1e-8);

  const QpInstance rnd = generate_baseline(5, 0, Variant::L1Constrained, 55);
  const StepSizes s = StepSizes::defaults(rnd);
  auto m2 = build_c_machine(rnd, s, VectorXd::Zero(5));
  VectorXd x = VectorXd::Zero(5);
  for (int k = 0; k < 1000; ++k) {
    m2->apply_layer();
    x = pgd_step(rnd, s, x);
    CHECK((m2->x() - x).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("data rows are bitwise immutable across layers") {
  for (Variant v : {Variant::Unconstrained, Variant::L1Regularized, Variant::L1Constrained,
                    Variant::LinearlyConstrained}) {
    const Eigen::Index m = v == Variant::LinearlyConstrained ? 3 : 0;
    const QpInstance inst = generate_baseline(5, m, v, 101);
    const StepSizes steps = StepSizes::defaults(inst);
    auto machine = build_machine(inst, steps);
    const Eigen::Index data_rows = 5 + (v == Variant::LinearlyConstrained ? 3 : 1);
    const MatrixXd before = machine->tokens().topRows(data_rows);
    for (int k = 0; k < 50; ++k) machine->apply_layer();
    const MatrixXd after = machine->tokens().topRows(data_rows);
    REQUIRE(before.size() == after.size());
    CHECK(std::memcmp(before.data(), after.data(),
                      sizeof(double) * static_cast<std::size_t>(before.size())) == 0);
  }
}

TEST_CASE("emulation equivalence across seeded instances") {
  // Reduced sweep; the acceptance suite runs the full 100-seed version.
  for (Variant v : {Variant::Unconstrained, Variant::L1Regularized, Variant::L1Constrained,
                    Variant::LinearlyConstrained}) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 15);
      const Eigen::Index m =
          v == Variant::LinearlyConstrained ? 1 + static_cast<Eigen::Index>(seed % 8) : 0;
      const QpInstance inst = generate_baseline(n, m, v, seed);
      const StepSizes steps = StepSizes::defaults(inst);
      auto machine = build_machine(inst, steps);
      VectorXd x = VectorXd::Zero(n);
      VectorXd lam = VectorXd::Zero(m);
      for (int k = 0; k < 200; ++k) {
        machine->apply_layer();
        switch (v) {
          case Variant::Unconstrained: x = gd_step(inst, steps, x); break;
          case Variant::L1Regularized: x = ista_step(inst, steps, x); break;
          case Variant::L1Constrained: x = pgd_step(inst, steps, x); break;
          case Variant::LinearlyConstrained: {
            auto [xn, ln] = arrow_hurwicz_step(inst, steps, x, lam);
            x = std::move(xn);
            lam = std::move(ln);
            break;
          }
        }
        worst = std::max(worst, (machine->x() - x).cwiseAbs().maxCoeff());
        if (v == Variant::LinearlyConstrained)
          worst = std::max(worst, (*machine->lambda() - lam).cwiseAbs().maxCoeff());
      }
    }
    CHECK(worst <= (v == Variant::L1Constrained ? 1e-7 : 1e-9));
  }
}

TEST_CASE("emulate mirrors run end to end") {
  const QpInstance inst = lc_toy();
  SolveConfig cfg = SolveConfig::defaults(inst);
  cfg.tol = 1e-6;
  const StepSizes steps = StepSizes::defaults(inst);
  const SolverTrace classical = run(inst, steps, cfg);
  const SolverTrace machine = emulate(inst, steps, cfg);
  CHECK(machine.converged);
  CHECK(machine.iterations == classical.iterations);
  CHECK((machine.iterates.back() - classical.iterates.back()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("emulate validates its dual start like run") {
  const QpInstance inst = lc_toy();
  const StepSizes steps = StepSizes::defaults(inst);
  SolveConfig cfg = SolveConfig::defaults(inst);
  (*cfg.lam0)[0] = -0.5;
  CHECK_THROWS_AS(emulate(inst, steps, cfg), std::invalid_argument);

  const QpInstance u = u_toy();
  SolveConfig ucfg = SolveConfig::defaults(u);
  ucfg.lam0 = VectorXd::Zero(1);
  CHECK_THROWS_AS(emulate(u, StepSizes::defaults(u), ucfg), std::invalid_argument);
}

TEST_CASE("head_apply rejects bad query rows and key ranges") {
  const QpInstance inst = u_toy();
  TokenStateU state = TokenStateU::build(inst, 0.25, VectorXd::Zero(2));
  const LinearAttentionHead head = u_head(2);
  CHECK_THROWS_AS(head_apply(head, state.tokens, 99), std::invalid_argument);
  CHECK_THROWS_AS(head_apply(head, state.tokens, 0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(head_apply(head, state.tokens, 0, 0, 99), std::invalid_argument);
}
