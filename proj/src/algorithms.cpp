#include "dopt/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dopt {

namespace {

int data_dim(const Expression& cost, const std::vector<Constraint>& cons) {
  int d = cost.input_dim();
  for (const auto& c : cons) {
    if (d < 0)
      d = c.dim();
    else if (c.dim() != d)
      throw std::invalid_argument("local data dimensions disagree");
  }
  if (d < 1) throw std::invalid_argument("cannot infer the local dimension");
  return d;
}

Eigen::VectorXd weighted_mix(Agent& agent, const Eigen::VectorXd& own,
                             const std::map<int, std::vector<Tensor>>& got,
                             size_t slot) {
  Eigen::VectorXd z = agent.weight(agent.id()) * own;
  for (const auto& [j, payload] : got) {
    if (slot >= payload.size())
      throw std::runtime_error("neighbor payload is missing a tensor");
    Eigen::VectorXd v = payload[slot].as_vector();
    if (v.size() != own.size())
      throw std::runtime_error("neighbor payload dimension mismatch");
    z += agent.weight(j) * v;
  }
  return z;
}

}  // namespace

StepSize StepSize::constant(double alpha) {
  if (!(alpha > 0.0))
    throw std::invalid_argument("constant step size must be positive");
  return {Rule::constant, alpha};
}

StepSize StepSize::diminishing(double exponent) {
  if (!(exponent > 0.5) || !(exponent <= 1.0))
    throw std::invalid_argument("diminishing exponent must lie in (0.5, 1]");
  return {Rule::diminishing, exponent};
}

double StepSize::at(uint64_t t) const {
  if (t < 1) throw std::invalid_argument("step index starts at 1");
  if (rule == Rule::constant) return value;
  return std::pow(1.0 / static_cast<double>(t), value);
}

const HistoryRecord& Algorithm::result() const {
  if (history_.empty()) throw std::logic_error("algorithm not initialized");
  return history_.back();
}

void Algorithm::record(uint64_t round, double local_cost,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& aux) {
  history_.push_back({round, local_cost, x, aux});
}

// ---------------------------------------------------------------------------
// SubgradientMethod

SubgradientMethod::SubgradientMethod(std::optional<Eigen::VectorXd> initial)
    : initial_(std::move(initial)) {}

void SubgradientMethod::init(Agent& agent, const StepSize& step) {
  agent_ = &agent;
  step_ = step;
  if (!std::holds_alternative<CostCoupledLocal>(agent.local_data()))
    throw std::invalid_argument(name() + " requires cost-coupled local data");
  const auto& data = agent.local<CostCoupledLocal>();
  int d = data_dim(data.cost, data.local_set);
  agent.weight(agent.id());  // weights are required; throws when absent

  x_ = initial_ ? *initial_ : Eigen::VectorXd::Zero(d);
  if (x_.size() != d)
    throw std::invalid_argument("initial iterate has the wrong dimension");
  x_ = project(data.local_set, x_);
  history_.clear();
  record(0, data.cost.evaluate_scalar(x_), x_, Eigen::VectorXd());
}

void SubgradientMethod::iterate(uint64_t t) {
  const auto& data = agent_->local<CostCoupledLocal>();
  auto got =
      agent_->neighbors_exchange({Tensor::vector(x_)}, MessageKind::state);
  Eigen::VectorXd z = weighted_mix(*agent_, x_, got, 0);
  Eigen::VectorXd g = data.cost.subgradient(z);
  x_ = project(data.local_set, z - step_.at(t) * g);
  record(t, data.cost.evaluate_scalar(x_), x_, Eigen::VectorXd());
}

// ---------------------------------------------------------------------------
// GradientTracking

GradientTracking::GradientTracking(std::optional<Eigen::VectorXd> initial)
    : initial_(std::move(initial)) {}

void GradientTracking::init(Agent& agent, const StepSize& step) {
  agent_ = &agent;
  step_ = step;
  if (step.rule != StepSize::Rule::constant)
    throw std::invalid_argument(name() + " requires a constant step size");
  if (!std::holds_alternative<CostCoupledLocal>(agent.local_data()))
    throw std::invalid_argument(name() + " requires cost-coupled local data");
  const auto& data = agent.local<CostCoupledLocal>();
  if (!data.local_set.empty())
    throw std::invalid_argument(name() +
                                " is unconstrained; the local set must be empty");
  int d = data.cost.input_dim();
  if (d < 1) throw std::invalid_argument("cannot infer the local dimension");
  agent.weight(agent.id());

  x_ = initial_ ? *initial_ : Eigen::VectorXd::Zero(d);
  if (x_.size() != d)
    throw std::invalid_argument("initial iterate has the wrong dimension");
  grad_ = data.cost.subgradient(x_);
  s_ = grad_;
  history_.clear();
  record(0, data.cost.evaluate_scalar(x_), x_, s_);
}

void GradientTracking::iterate(uint64_t t) {
  const auto& data = agent_->local<CostCoupledLocal>();
  auto got = agent_->neighbors_exchange(
      {Tensor::vector(x_), Tensor::vector(s_)}, MessageKind::state);
  Eigen::VectorXd wx = weighted_mix(*agent_, x_, got, 0);
  Eigen::VectorXd ws = weighted_mix(*agent_, s_, got, 1);
  Eigen::VectorXd x_new = wx - step_.at(t) * s_;
  Eigen::VectorXd g_new = data.cost.subgradient(x_new);
  s_ = ws + g_new - grad_;
  grad_ = g_new;
  x_ = x_new;
  record(t, data.cost.evaluate_scalar(x_), x_, s_);
}

// ---------------------------------------------------------------------------
// ConstraintsConsensus

namespace {

// Basis rows travel as [a | b | kind]; kind 0 is <=, 1 is =.
Eigen::MatrixXd rows_of(const std::vector<Constraint>& cons, int dim) {
  Eigen::Index total = 0;
  for (const auto& c : cons) {
    if (!c.is_affine())
      throw std::invalid_argument(
          "constraints consensus requires affine constraint sets");
    total += c.rows();
  }
  Eigen::MatrixXd rows(total, dim + 2);
  Eigen::Index at = 0;
  for (const auto& c : cons) {
    double kind = c.kind() == ConstraintKind::affine_equality ? 1.0 : 0.0;
    for (Eigen::Index r = 0; r < c.rows(); ++r, ++at) {
      rows.block(at, 0, 1, dim) = c.a().row(r);
      rows(at, dim) = c.b()(r);
      rows(at, dim + 1) = kind;
    }
  }
  return rows;
}

std::vector<Constraint> constraints_of(const Eigen::MatrixXd& rows, int dim,
                                       const std::vector<char>& kept) {
  std::vector<Constraint> cons;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if (!kept[static_cast<size_t>(r)]) continue;
    Eigen::VectorXd a = rows.block(r, 0, 1, dim).transpose();
    if (rows(r, dim + 1) == 0.0)
      cons.push_back(Constraint::row_le(a, rows(r, dim)));
    else
      cons.push_back(Constraint::row_eq(a, rows(r, dim)));
  }
  return cons;
}

bool row_less(const Eigen::MatrixXd& m, Eigen::Index i, Eigen::Index j) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m(i, c) < m(j, c)) return true;
    if (m(i, c) > m(j, c)) return false;
  }
  return false;
}

Eigen::MatrixXd dedup_sorted_rows(const Eigen::MatrixXd& rows) {
  std::vector<Eigen::Index> order(static_cast<size_t>(rows.rows()));
  for (size_t i = 0; i < order.size(); ++i)
    order[i] = static_cast<Eigen::Index>(i);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return row_less(rows, a, b); });
  std::vector<Eigen::Index> keep;
  for (Eigen::Index idx : order) {
    if (!keep.empty() && rows.row(keep.back()) == rows.row(idx)) continue;
    keep.push_back(idx);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(keep.size()), rows.cols());
  for (size_t i = 0; i < keep.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows.row(keep[i]);
  return out;
}

}  // namespace

void ConstraintsConsensus::init(Agent& agent, const StepSize& step) {
  agent_ = &agent;
  step_ = step;
  if (!std::holds_alternative<CommonCostLocal>(agent.local_data()))
    throw std::invalid_argument(name() + " requires common-cost local data");
  const auto& data = agent.local<CommonCostLocal>();
  dim_ = data_dim(data.cost, data.local_set);

  // Seed the basis from the agent's own rows so the very first broadcast
  // already carries the locally binding constraints.
  basis_ = Eigen::MatrixXd(0, dim_ + 2);
  solve_and_extract(dedup_sorted_rows(rows_of(data.local_set, dim_)));
  history_.clear();
  record(0, data.cost.evaluate_scalar(x_), x_, pack_basis());
}

Eigen::VectorXd ConstraintsConsensus::pack_basis() const {
  const Eigen::Index cap = dim_ + 2;
  if (basis_.rows() > cap)
    throw std::runtime_error("basis exceeded its expected size");
  Eigen::VectorXd aux =
      Eigen::VectorXd::Constant(1 + cap * (dim_ + 2),
                                std::numeric_limits<double>::quiet_NaN());
  aux(0) = static_cast<double>(basis_.rows());
  for (Eigen::Index r = 0; r < basis_.rows(); ++r)
    for (Eigen::Index c = 0; c < dim_ + 2; ++c)
      aux(1 + r * (dim_ + 2) + c) = basis_(r, c);
  return aux;
}

void ConstraintsConsensus::iterate(uint64_t t) {
  const auto& data = agent_->local<CommonCostLocal>();
  auto got = agent_->neighbors_exchange({Tensor::matrix(basis_)},
                                        MessageKind::basis);
  Eigen::MatrixXd own = rows_of(data.local_set, dim_);
  Eigen::Index total = own.rows() + basis_.rows();
  for (const auto& [j, payload] : got)
    total += payload.at(0).as_matrix().rows();

  Eigen::MatrixXd cand(total, dim_ + 2);
  Eigen::Index at = 0;
  auto append = [&](const Eigen::MatrixXd& m) {
    if (m.rows() > 0 && m.cols() != dim_ + 2)
      throw std::runtime_error("basis row width mismatch");
    cand.block(at, 0, m.rows(), dim_ + 2) = m;
    at += m.rows();
  };
  append(own);
  append(basis_);
  for (const auto& [j, payload] : got) append(payload.at(0).as_matrix());

  solve_and_extract(dedup_sorted_rows(cand));
  record(t, data.cost.evaluate_scalar(x_), x_, pack_basis());
}

void ConstraintsConsensus::solve_and_extract(const Eigen::MatrixXd& candidates) {
  const auto& data = agent_->local<CommonCostLocal>();
  const Eigen::Index k = candidates.rows();
  std::vector<char> kept(static_cast<size_t>(k), 1);

  Solution full =
      tie_broken_solve({data.cost, constraints_of(candidates, dim_, kept)});
  if (full.status != SolveStatus::optimal)
    throw std::runtime_error(name() + ": candidate problem is " +
                             to_string(full.status));
  x_ = full.x;

  for (Eigen::Index r = 0; r < k; ++r) {
    kept[static_cast<size_t>(r)] = 0;
    Solution trial =
        tie_broken_solve({data.cost, constraints_of(candidates, dim_, kept)});
    bool same = trial.status == SolveStatus::optimal &&
                (trial.x - x_).lpNorm<Eigen::Infinity>() <= 1e-9;
    if (!same) kept[static_cast<size_t>(r)] = 1;
  }

  Eigen::Index nb = 0;
  for (char c : kept) nb += c;
  basis_.resize(nb, dim_ + 2);
  Eigen::Index at = 0;
  for (Eigen::Index r = 0; r < k; ++r)
    if (kept[static_cast<size_t>(r)]) basis_.row(at++) = candidates.row(r);
}

// ---------------------------------------------------------------------------
// DualSubgradient

void DualSubgradient::init(Agent& agent, const StepSize& step) {
  agent_ = &agent;
  step_ = step;
  if (!std::holds_alternative<ConstraintCoupledLocal>(agent.local_data()))
    throw std::invalid_argument(name() +
                                " requires constraint-coupled local data");
  const auto& data = agent.local<ConstraintCoupledLocal>();
  dim_ = data_dim(data.cost, data.local_set);
  if (!data.coupling.is_affine())
    throw std::invalid_argument(name() + " requires an affine coupling map");
  coupling_dim_ = data.coupling.output_dim();
  data.coupling.affine_coefficients(dim_, g_mat_, g_off_);
  agent.weight(agent.id());

  mu_ = Eigen::VectorXd::Zero(coupling_dim_);
  x_ = solve_priced(Eigen::VectorXd::Zero(coupling_dim_), 0);
  xbar_ = x_;
  history_.clear();
  Eigen::VectorXd aux(coupling_dim_ + dim_);
  aux << mu_, x_;
  record(0, data.cost.evaluate_scalar(xbar_), xbar_, aux);
}

Eigen::VectorXd DualSubgradient::solve_priced(const Eigen::VectorXd& nu,
                                              uint64_t t) {
  const auto& data = agent_->local<ConstraintCoupledLocal>();
  Expression priced =
      data.cost + Expression::affine_row(g_mat_.transpose() * nu,
                                         nu.dot(g_off_));
  Solution s = solve({priced, data.local_set});
  if (s.status != SolveStatus::optimal)
    throw std::runtime_error(name() + ": local argmin is " +
                             to_string(s.status) + " at round " +
                             std::to_string(t));
  return s.x;
}

void DualSubgradient::iterate(uint64_t t) {
  const auto& data = agent_->local<ConstraintCoupledLocal>();
  auto got = agent_->neighbors_exchange({Tensor::vector(mu_)},
                                        MessageKind::multiplier);
  Eigen::VectorXd nu = weighted_mix(*agent_, mu_, got, 0);
  x_ = solve_priced(nu, t);
  mu_ = (nu + step_.at(t) * (g_mat_ * x_ + g_off_)).cwiseMax(0.0);
  xbar_ = (static_cast<double>(t - 1) * xbar_ + x_) / static_cast<double>(t);
  Eigen::VectorXd aux(coupling_dim_ + dim_);
  aux << mu_, x_;
  record(t, data.cost.evaluate_scalar(xbar_), xbar_, aux);
}

// ---------------------------------------------------------------------------
// PrimalDecomposition

PrimalDecomposition::PrimalDecomposition(
    double penalty, std::optional<Eigen::VectorXd> initial_allocation)
    : penalty_(penalty), initial_allocation_(std::move(initial_allocation)) {
  if (!(penalty_ > 0.0))
    throw std::invalid_argument("penalty weight must be positive");
}

void PrimalDecomposition::init(Agent& agent, const StepSize& step) {
  agent_ = &agent;
  step_ = step;
  if (!std::holds_alternative<ConstraintCoupledLocal>(agent.local_data()))
    throw std::invalid_argument(name() +
                                " requires constraint-coupled local data");
  const auto& data = agent.local<ConstraintCoupledLocal>();
  if (agent.in_neighbors() != agent.out_neighbors())
    throw std::invalid_argument(name() + " requires an undirected graph");
  dim_ = data_dim(data.cost, data.local_set);
  if (!data.coupling.is_affine())
    throw std::invalid_argument(name() + " requires an affine coupling map");
  coupling_dim_ = data.coupling.output_dim();
  data.coupling.affine_coefficients(dim_, g_mat_, g_off_);

  // Lift the local problem to (x, rho) with the exact-penalty slack rho >= 0.
  lifted_set_.clear();
  Eigen::VectorXd rho_row = Eigen::VectorXd::Zero(dim_ + 1);
  rho_row(dim_) = 1.0;
  lifted_set_.push_back(Constraint::row_ge(rho_row, 0.0));
  for (const auto& c : data.local_set) {
    if (!c.is_affine())
      throw std::invalid_argument(name() +
                                  " requires an affine local constraint set");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c.rows(), dim_ + 1);
    a.leftCols(dim_) = c.a();
    if (c.kind() == ConstraintKind::affine_equality)
      lifted_set_.push_back(Constraint::affine_eq(a, c.b()));
    else
      lifted_set_.push_back(Constraint::affine_le(a, c.b()));
  }

  y_ = initial_allocation_ ? *initial_allocation_
                           : Eigen::VectorXd::Zero(coupling_dim_);
  if (y_.size() != coupling_dim_)
    throw std::invalid_argument("initial allocation has the wrong dimension");

  history_.clear();
  solve_local(0);
  Eigen::VectorXd aux(2 * coupling_dim_);
  aux << mu_, y_;
  record(0, data.cost.evaluate_scalar(x_), x_, aux);
}

void PrimalDecomposition::solve_local(uint64_t t) {
  const auto& data = agent_->local<ConstraintCoupledLocal>();

  Expression lifted_cost = [&] {
    if (data.cost.curvature() == Curvature::affine) {
      Eigen::MatrixXd m;
      Eigen::VectorXd q;
      data.cost.affine_coefficients(dim_, m, q);
      Eigen::VectorXd c(dim_ + 1);
      c << m.row(0).transpose(), penalty_;
      return Expression::affine_row(c, q(0));
    }
    if (data.cost.curvature() == Curvature::quadratic) {
      Eigen::MatrixXd p;
      Eigen::VectorXd q;
      double r = 0.0;
      data.cost.quadratic_coefficients(dim_, p, q, r);
      Eigen::MatrixXd pl = Eigen::MatrixXd::Zero(dim_ + 1, dim_ + 1);
      pl.topLeftCorner(dim_, dim_) = p;
      Eigen::VectorXd ql(dim_ + 1);
      ql << q, penalty_;
      return Expression::quadratic_form(pl, ql, r);
    }
    throw std::invalid_argument(
        name() + " requires an affine or quadratic local cost");
  }();

  // Allocation rows first so their duals sit at the head of dual_values.
  Eigen::MatrixXd a_alloc(coupling_dim_, dim_ + 1);
  a_alloc.leftCols(dim_) = g_mat_;
  a_alloc.col(dim_) = Eigen::VectorXd::Constant(coupling_dim_, -1.0);
  std::vector<Constraint> cons;
  cons.push_back(Constraint::affine_le(a_alloc, y_ - g_off_));
  cons.insert(cons.end(), lifted_set_.begin(), lifted_set_.end());

  Solution s = solve({lifted_cost, cons});
  if (s.status != SolveStatus::optimal)
    throw std::runtime_error(name() + ": local problem is " +
                             to_string(s.status) + " at round " +
                             std::to_string(t));
  x_ = s.x.head(dim_);
  mu_ = s.dual_values.head(coupling_dim_);
}

void PrimalDecomposition::iterate(uint64_t t) {
  const auto& data = agent_->local<ConstraintCoupledLocal>();
  std::map<int, std::vector<Tensor>> payloads;
  for (int j : agent_->out_neighbors())
    payloads[j] = {Tensor::vector(mu_)};
  auto got = agent_->neighbors_exchange_keyed(payloads,
                                              MessageKind::multiplier);

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(coupling_dim_);
  for (const auto& [j, payload] : got) {
    Eigen::VectorXd mu_j = payload.at(0).as_vector();
    if (mu_j.size() != coupling_dim_)
      throw std::runtime_error("neighbor multiplier dimension mismatch");
    delta += mu_ - mu_j;
  }
  y_ += step_.at(t) * delta;

  solve_local(t);
  Eigen::VectorXd aux(2 * coupling_dim_);
  aux << mu_, y_;
  record(t, data.cost.evaluate_scalar(x_), x_, aux);
}

// ---------------------------------------------------------------------------

History run(Algorithm& algorithm, Agent& agent, uint64_t iterations,
            const StepSize& step) {
  algorithm.init(agent, step);
  agent.barrier();
  for (uint64_t t = 1; t <= iterations; ++t) {
    algorithm.iterate(t);
    agent.barrier();
  }
  return algorithm.history();
}

}  // namespace dopt
