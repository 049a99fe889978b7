#include "qpemu/attention_machine.hpp"

#include <cmath>

namespace qpemu {

namespace {

// Kahan-compensated accumulator for sum_t w_t * v_t, elementwise over the
// output, tokens added in row order. The update is fused into one pass; the
// compensation chains per component, so the loop vectorizes across
// components.
class KahanAccumulator {
 public:
  explicit KahanAccumulator(Eigen::Index n)
      : sum_(VectorXd::Zero(n)), comp_(VectorXd::Zero(n)), scratch_(n) {}

  void add(double w, const double* v) {
    double* s = sum_.data();
    double* c = comp_.data();
    const Eigen::Index n = sum_.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = w * v[i] - c[i];
      const double t = s[i] + y;
      c[i] = (t - s[i]) - y;
      s[i] = t;
    }
  }

  template <typename Expr>
  void add_expr(double w, const Expr& v) {
    scratch_ = v;
    add(w, scratch_.data());
  }

  const VectorXd& value() const { return sum_; }

 private:
  VectorXd sum_, comp_, scratch_;
};

// Attention weights <q, k_t> for all tokens at once; keys are stored one
// column per token. Shared by head_apply and the machines so both produce
// identical floating point.
VectorXd attention_weights(const Eigen::Ref<const MatrixXd>& keys_by_col, const VectorXd& q) {
  return keys_by_col.transpose() * q;
}

// (y - theta)_+ - (-y - theta)_+ coordinatewise; equals S_theta(y) exactly.
VectorXd ffn_form_soft_threshold(const VectorXd& y, double theta) {
  VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pos = std::max(y[i] - theta, 0.0);
    const double neg = std::max(-y[i] - theta, 0.0);
    out[i] = pos - neg;
  }
  return out;
}

// |S_theta(y)|_1 via the two ReLU branches, without materializing x.
double ffn_form_l1_norm(const VectorXd& y, double theta) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pos = std::max(y[i] - theta, 0.0);
    const double neg = std::max(-y[i] - theta, 0.0);
    s += pos + neg;
  }
  return s;
}

}  // namespace

VectorXd head_apply(const LinearAttentionHead& head, const MatrixXd& tokens,
                    Eigen::Index query_row) {
  return head_apply(head, tokens, query_row, 0, tokens.rows());
}

VectorXd head_apply(const LinearAttentionHead& head, const MatrixXd& tokens,
                    Eigen::Index query_row, Eigen::Index key_begin, Eigen::Index key_end) {
  const Eigen::Index width = tokens.cols();
  if (head.w_q.rows() != width || head.w_k.rows() != width || head.w_v.rows() != width)
    throw std::invalid_argument("head_apply: head maps do not match token width");
  if (head.w_q.cols() != head.w_k.cols())
    throw std::invalid_argument("head_apply: query/key dimensions differ");
  if (query_row < 0 || query_row >= tokens.rows())
    throw std::invalid_argument("head_apply: query_row out of range");
  if (key_begin < 0 || key_end > tokens.rows() || key_begin > key_end)
    throw std::invalid_argument("head_apply: key range out of range");

  const VectorXd q = (tokens.row(query_row) * head.w_q).transpose();
  const Eigen::Index count = key_end - key_begin;
  const MatrixXd keys_by_col =
      (tokens.middleRows(key_begin, count) * head.w_k).transpose();
  const VectorXd weights = attention_weights(keys_by_col, q);
  KahanAccumulator acc(head.w_v.cols());
  for (Eigen::Index t = 0; t < count; ++t) {
    const Eigen::RowVectorXd v = tokens.row(key_begin + t) * head.w_v;
    acc.add(weights[t], v.data());
  }
  return acc.value();
}

SoftThresholdFfn SoftThresholdFfn::make(Eigen::Index n, double theta) {
  if (theta < 0.0) throw std::invalid_argument("SoftThresholdFfn: theta must be >= 0");
  SoftThresholdFfn ffn;
  ffn.w1 = MatrixXd::Zero(2 * n, n);
  ffn.w1.topRows(n) = MatrixXd::Identity(n, n);
  ffn.w1.bottomRows(n) = -MatrixXd::Identity(n, n);
  ffn.w2 = MatrixXd::Zero(n, 2 * n);
  ffn.w2.leftCols(n) = MatrixXd::Identity(n, n);
  ffn.w2.rightCols(n) = -MatrixXd::Identity(n, n);
  ffn.bias_theta = theta;
  return ffn;
}

VectorXd SoftThresholdFfn::apply(const VectorXd& y, double theta) const {
  if (2 * y.size() != w1.rows())
    throw std::invalid_argument("SoftThresholdFfn: input has wrong dimension");
  return ffn_form_soft_threshold(y, theta);
}

ThresholdLoopResult threshold_loop(const VectorXd& y, double budget, double eta,
                                   std::size_t max_inner, double inner_tol,
                                   std::vector<std::pair<double, double>>* log) {
  if (!(budget > 0.0)) throw std::invalid_argument("threshold_loop: budget must be > 0");
  const double n = static_cast<double>(y.size());
  if (!(eta > 0.0) || !(eta <= 1.0 / n))
    throw std::invalid_argument("threshold_loop: eta violates 0 < eta <= 1/n");

  double theta = 0.0;
  for (std::size_t t = 0; t <= max_inner; ++t) {
    const double excess = std::max(ffn_form_l1_norm(y, theta) - budget, 0.0);
    if (log) log->emplace_back(theta, excess);
    if (excess <= inner_tol)
      return {theta, ffn_form_soft_threshold(y, theta), t};
    theta += eta * excess;
  }
  const double excess = std::max(ffn_form_l1_norm(y, theta) - budget, 0.0);
  throw ConvergenceError("threshold_loop: max_inner exhausted", theta, excess);
}

TokenStateU TokenStateU::build(const QpInstance& inst, double gamma, const VectorXd& x0) {
  const Eigen::Index n = inst.n();
  if (x0.size() != n) throw std::invalid_argument("TokenStateU: x0 has wrong dimension");
  TokenStateU state;
  state.gamma = gamma;
  state.tokens = MatrixXd::Zero(n + 2, 2 * n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    state.tokens.row(i).head(n) = inst.a_matrix().row(i);
    state.tokens(i, n + i) = 1.0;
  }
  state.tokens.row(n).segment(n, n) = inst.b_vec().transpose();
  state.tokens(n, 2 * n) = 1.0;
  state.tokens.row(n + 1).head(n) = x0.transpose();
  state.tokens(n + 1, 2 * n) = 1.0;
  return state;
}

TokenStateLC TokenStateLC::build(const QpInstance& inst, double gamma, double eta,
                                 const VectorXd& x0, const VectorXd& lam0) {
  const Eigen::Index n = inst.n();
  const Eigen::Index m = inst.m();
  if (x0.size() != n || lam0.size() != m)
    throw std::invalid_argument("TokenStateLC: x0/lam0 have wrong dimensions");
  if ((lam0.array() < 0.0).any())
    throw std::invalid_argument("TokenStateLC: lam0 must be elementwise nonnegative");
  TokenStateLC state;
  state.gamma = gamma;
  state.eta = eta;
  const Eigen::Index width = 2 * n + m + 1;
  state.tokens = MatrixXd::Zero(n + m + 2, width);
  for (Eigen::Index i = 0; i < n; ++i) {
    state.tokens.row(i).head(n) = inst.a_matrix().row(i);
    state.tokens(i, n + i) = 1.0;
    state.tokens(i, width - 1) = inst.b_vec()[i];
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    state.tokens.row(n + i).head(n) = inst.c_matrix().row(i);
    state.tokens(n + i, 2 * n + i) = 1.0;
    state.tokens(n + i, width - 1) = -inst.d_vec()[i];
  }
  state.tokens.row(n + m).head(n) = x0.transpose();
  state.tokens(n + m, width - 1) = 1.0;
  state.tokens.row(n + m + 1).segment(2 * n, m) = lam0.transpose();
  state.tokens(n + m + 1, width - 1) = 1.0;
  return state;
}

namespace {

// Selector maps for the unconstrained layout, materialized as dense
// matrices: W_Q = W_K = [E' S'], W_V = R'.
LinearAttentionHead make_u_head(Eigen::Index n) {
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

// The gradient head applied to the U token layout: q = [x; 1] from the
// x-row, keys [a_i; 0] / [0; 1], values e_i / b. The x-row participates as
// a key with value 0 (its ID slice is zero), so its self-contribution
// vanishes without masking. All row slices below are exactly the
// materialized selector products.
class UCore {
 public:
  UCore(const QpInstance& inst, double gamma, const VectorXd& x0)
      : n_(inst.n()), state_(TokenStateU::build(inst, gamma, x0)) {
    const LinearAttentionHead head = make_u_head(n_);
    // One column per token so the hot loop reads stride-1 slices; the data
    // columns never change, the x column is refreshed per layer.
    keys_ = (state_.tokens * head.w_k).transpose();
    v_data_ = (state_.tokens.topRows(n_ + 1) * head.w_v).transpose();
  }

  VectorXd gradient() {
    keys_.col(n_ + 1).head(n_) = state_.tokens.row(n_ + 1).head(n_).transpose();
    keys_(n_, n_ + 1) = state_.tokens(n_ + 1, 2 * n_);
    const VectorXd q = keys_.col(n_ + 1);
    const VectorXd weights = attention_weights(keys_, q);
    KahanAccumulator acc(n_);
    for (Eigen::Index t = 0; t <= n_; ++t) acc.add(weights[t], v_data_.col(t).data());
    // x-row as its own key: weight <q, q>, value = ID slice = 0.
    acc.add_expr(weights[n_ + 1], state_.tokens.row(n_ + 1).segment(n_, n_).transpose());
    return acc.value();
  }

  VectorXd x() const { return state_.tokens.row(n_ + 1).head(n_); }
  void set_x(const VectorXd& x) {
    if (x.size() != n_) throw std::invalid_argument("set_x: wrong dimension");
    state_.tokens.row(n_ + 1).head(n_) = x.transpose();
  }
  const MatrixXd& tokens() const { return state_.tokens; }
  double gamma() const { return state_.gamma; }

 private:
  Eigen::Index n_;
  TokenStateU state_;
  MatrixXd keys_, v_data_;
};

class UMachine : public Machine {
 public:
  UMachine(const QpInstance& inst, double gamma, const VectorXd& x0) : core_(inst, gamma, x0) {}
  void apply_layer() override {
    core_.set_x(core_.x() - core_.gamma() * core_.gradient());
  }
  VectorXd x() const override { return core_.x(); }
  const MatrixXd& tokens() const override { return core_.tokens(); }
  void set_x(const VectorXd& x) override { core_.set_x(x); }

 private:
  UCore core_;
};

class RMachine : public Machine {
 public:
  RMachine(const QpInstance& inst, double gamma, const VectorXd& x0)
      : core_(inst, gamma, x0),
        ffn_(SoftThresholdFfn::make(inst.n(), gamma * inst.l1_weight())) {}
  void apply_layer() override {
    VectorXd y = core_.x() - core_.gamma() * core_.gradient();
    core_.set_x(ffn_.apply(y));
  }
  VectorXd x() const override { return core_.x(); }
  const MatrixXd& tokens() const override { return core_.tokens(); }
  void set_x(const VectorXd& x) override { core_.set_x(x); }

 private:
  UCore core_;
  SoftThresholdFfn ffn_;
};

class CMachine : public Machine {
 public:
  CMachine(const QpInstance& inst, double gamma, double eta, const VectorXd& x0)
      : core_(inst, gamma, x0), budget_(inst.l1_budget()), eta_(eta) {}
  void apply_layer() override {
    VectorXd y = core_.x() - core_.gamma() * core_.gradient();
    core_.set_x(threshold_loop(y, budget_, eta_).x);
  }
  VectorXd x() const override { return core_.x(); }
  const MatrixXd& tokens() const override { return core_.tokens(); }
  void set_x(const VectorXd& x) override { core_.set_x(x); }

 private:
  UCore core_;
  double budget_;
  double eta_;
};

// Two-block macro for the linearly constrained layout. Three heads:
//   grad head at the x-row  -> Ax + b   (keys [content; const], values n-ID)
//   dual head at the lam-row -> C'lam   (keys m-ID, values content)
//   feedback head at the x-row -> Cx - d (keys [content; const], values m-ID)
// The first two sum over every token row; the zero patterns cancel all
// foreign contributions. The feedback head sums over the data and x rows
// only: the dual token's unit constant channel would otherwise leak lam
// into the output (its key [0; 1] pairs with the query's constant slot),
// and no linear key map can keep -d while silencing it.
class LcMachine : public Machine {
 public:
  LcMachine(const QpInstance& inst, double gamma, double eta, const VectorXd& x0,
            const VectorXd& lam0)
      : n_(inst.n()), m_(inst.m()), state_(TokenStateLC::build(inst, gamma, eta, x0, lam0)) {
    const Eigen::Index width = 2 * n_ + m_ + 1;
    const Eigen::Index data_rows = n_ + m_;
    const MatrixXd& z = state_.tokens;

    // One column per token so the hot loop reads stride-1 slices. Data
    // columns are fixed; the x and lam key columns are refreshed per layer.
    k_grad_.resize(n_ + 1, data_rows + 2);
    v_grad_.resize(n_, data_rows);
    k_dual_.resize(m_, data_rows + 2);
    v_dual_.resize(n_, data_rows);
    v_fb_.resize(m_, data_rows);
    for (Eigen::Index t = 0; t < data_rows + 2; ++t) {
      k_grad_.col(t).head(n_) = z.row(t).head(n_).transpose();
      k_grad_(n_, t) = z(t, width - 1);
      k_dual_.col(t) = z.row(t).segment(2 * n_, m_).transpose();
      if (t >= data_rows) continue;
      v_grad_.col(t) = z.row(t).segment(n_, n_).transpose();
      v_dual_.col(t) = z.row(t).head(n_).transpose();
      v_fb_.col(t) = z.row(t).segment(2 * n_, m_).transpose();
    }
  }

  void apply_layer() override {
    const Eigen::Index width = 2 * n_ + m_ + 1;
    const Eigen::Index xr = n_ + m_;
    const Eigen::Index lr = n_ + m_ + 1;
    MatrixXd& z = state_.tokens;

    k_grad_.col(xr).head(n_) = z.row(xr).head(n_).transpose();
    k_dual_.col(lr) = z.row(lr).segment(2 * n_, m_).transpose();
    const VectorXd q1 = k_grad_.col(xr);

    const VectorXd w_grad = attention_weights(k_grad_, q1);
    KahanAccumulator grad(n_);
    for (Eigen::Index t = 0; t < n_ + m_; ++t) grad.add(w_grad[t], v_grad_.col(t).data());
    grad.add_expr(w_grad[xr], z.row(xr).segment(n_, n_).transpose());  // x self, value 0
    grad.add_expr(w_grad[lr], z.row(lr).segment(n_, n_).transpose());  // lam: value 0

    const VectorXd lam = z.row(lr).segment(2 * n_, m_);
    const VectorXd w_dual = attention_weights(k_dual_, lam);
    KahanAccumulator ct(n_);
    for (Eigen::Index t = 0; t < n_ + m_; ++t) ct.add(w_dual[t], v_dual_.col(t).data());
    ct.add_expr(w_dual[xr], z.row(xr).head(n_).transpose());  // x row: key 0_m
    ct.add_expr(w_dual[lr], z.row(lr).head(n_).transpose());  // lam self, value 0

    const VectorXd x = z.row(xr).head(n_);
    const VectorXd x_next = x - state_.gamma * (grad.value() + ct.value());
    z.row(xr).head(n_) = x_next.transpose();

    k_grad_.col(xr).head(n_) = x_next;
    const VectorXd q3 = k_grad_.col(xr);
    const VectorXd w_fb = attention_weights(k_grad_.leftCols(n_ + m_ + 1), q3);
    KahanAccumulator fb(m_);
    for (Eigen::Index t = 0; t < n_ + m_; ++t) fb.add(w_fb[t], v_fb_.col(t).data());
    fb.add_expr(w_fb[xr], z.row(xr).segment(2 * n_, m_).transpose());  // x self, value 0

    const VectorXd lam_next = (lam + state_.eta * fb.value()).cwiseMax(0.0);
    z.row(lr).segment(2 * n_, m_) = lam_next.transpose();
  }

  VectorXd x() const override { return state_.tokens.row(n_ + m_).head(n_); }
  std::optional<VectorXd> lambda() const override {
    return VectorXd(state_.tokens.row(n_ + m_ + 1).segment(2 * n_, m_));
  }
  const MatrixXd& tokens() const override { return state_.tokens; }
  void set_x(const VectorXd& x) override {
    if (x.size() != n_) throw std::invalid_argument("set_x: wrong dimension");
    state_.tokens.row(n_ + m_).head(n_) = x.transpose();
  }
  void set_lambda(const VectorXd& lam) override {
    if (lam.size() != m_) throw std::invalid_argument("set_lambda: wrong dimension");
    if ((lam.array() < 0.0).any())
      throw std::invalid_argument("set_lambda: lam must be elementwise nonnegative");
    state_.tokens.row(n_ + m_ + 1).segment(2 * n_, m_) = lam.transpose();
  }

 private:
  Eigen::Index n_, m_;
  TokenStateLC state_;
  MatrixXd k_grad_, v_grad_, k_dual_, v_dual_, v_fb_;
};

}  // namespace

std::unique_ptr<Machine> build_u_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0) {
  if (inst.variant() != Variant::Unconstrained)
    throw std::invalid_argument("build_u_machine: variant must be U");
  steps.validate(inst);
  return std::make_unique<UMachine>(inst, steps.gamma, x0);
}

std::unique_ptr<Machine> build_lc_machine(const QpInstance& inst, const StepSizes& steps,
                                          const VectorXd& x0, const VectorXd& lam0) {
  if (inst.variant() != Variant::LinearlyConstrained)
    throw std::invalid_argument("build_lc_machine: variant must be LC");
  steps.validate(inst);
  return std::make_unique<LcMachine>(inst, steps.gamma, steps.eta, x0, lam0);
}

std::unique_ptr<Machine> build_r_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0) {
  if (inst.variant() != Variant::L1Regularized)
    throw std::invalid_argument("build_r_machine: variant must be R");
  steps.validate(inst);
  return std::make_unique<RMachine>(inst, steps.gamma, x0);
}

std::unique_ptr<Machine> build_c_machine(const QpInstance& inst, const StepSizes& steps,
                                         const VectorXd& x0) {
  if (inst.variant() != Variant::L1Constrained)
    throw std::invalid_argument("build_c_machine: variant must be C");
  steps.validate(inst);
  return std::make_unique<CMachine>(inst, steps.gamma, steps.eta, x0);
}

std::unique_ptr<Machine> build_machine(const QpInstance& inst, const StepSizes& steps,
                                       std::optional<VectorXd> x0,
                                       std::optional<VectorXd> lam0) {
  VectorXd x = x0 ? std::move(*x0) : VectorXd::Zero(inst.n());
  switch (inst.variant()) {
    case Variant::Unconstrained: return build_u_machine(inst, steps, x);
    case Variant::L1Regularized: return build_r_machine(inst, steps, x);
    case Variant::L1Constrained: return build_c_machine(inst, steps, x);
    case Variant::LinearlyConstrained: {
      VectorXd lam = lam0 ? std::move(*lam0) : VectorXd::Zero(inst.m());
      return build_lc_machine(inst, steps, x, lam);
    }
  }
  throw std::invalid_argument("build_machine: unknown variant");
}

SolverTrace emulate(const QpInstance& inst, const StepSizes& steps, const SolveConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("emulate: tol must be positive");
  if (cfg.x0.size() != inst.n()) throw std::invalid_argument("emulate: x0 has wrong dimension");
  const bool is_lc = inst.variant() == Variant::LinearlyConstrained;
  if (is_lc && (!cfg.lam0 || cfg.lam0->size() != inst.m()))
    throw std::invalid_argument("emulate: LC requires lam0 of length m");
  if (!is_lc && cfg.lam0)
    throw std::invalid_argument("emulate: lam0 only allowed for variant LC");

  auto machine = build_machine(inst, steps, cfg.x0, cfg.lam0);

  SolverTrace trace;
  if (is_lc) trace.duals.emplace();

  for (std::size_t k = 0;; ++k) {
    const VectorXd x = machine->x();
    const std::optional<VectorXd> lam = machine->lambda();
    const double res = evaluate_residual(inst, x, lam);
    if (!std::isfinite(res)) throw std::runtime_error("emulate: residual diverged to NaN/Inf");
    if (!cfg.record_trace) {
      trace.iterates.clear();
      trace.objectives.clear();
      trace.residuals.clear();
      if (trace.duals) trace.duals->clear();
    }
    trace.iterates.push_back(x);
    trace.objectives.push_back(evaluate_objective(inst, x));
    trace.residuals.push_back(res);
    if (trace.duals) trace.duals->push_back(*lam);
    trace.iterations = k;
    if (res <= cfg.tol) {
      trace.converged = true;
      break;
    }
    if (k >= cfg.max_iters) break;
    machine->apply_layer();
  }
  return trace;
}

}  // namespace qpemu
