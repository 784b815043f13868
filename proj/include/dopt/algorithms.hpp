#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dopt/agent.hpp"

namespace dopt {

struct StepSize {
  enum class Rule { constant, diminishing };
  Rule rule = Rule::constant;
  // alpha for the constant rule; exponent p of (1/t)^p for the diminishing
  // rule, with t starting at 1.
  double value = 0.1;

  static StepSize constant(double alpha);
  static StepSize diminishing(double exponent);
  double at(uint64_t t) const;
};

struct HistoryRecord {
  uint64_t round = 0;
  double local_cost = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd auxiliary;
};

using History = std::vector<HistoryRecord>;

// Per-agent synchronous state machine: init records round 0, each iterate
// runs one communication round and appends to the history.
class Algorithm {
 public:
  virtual ~Algorithm() = default;
  virtual std::string name() const = 0;
  virtual void init(Agent& agent, const StepSize& step) = 0;
  virtual void iterate(uint64_t t) = 0;

  const History& history() const { return history_; }
  const HistoryRecord& result() const;

 protected:
  void record(uint64_t round, double local_cost, const Eigen::VectorXd& x,
              const Eigen::VectorXd& aux);

  Agent* agent_ = nullptr;
  StepSize step_;
  History history_;
};

// Consensus step on the weighted neighborhood average, then a projected
// subgradient step on the local cost. Needs cost-coupled data and a
// row-stochastic weight row (doubly stochastic for exact optimality).
class SubgradientMethod : public Algorithm {
 public:
  explicit SubgradientMethod(std::optional<Eigen::VectorXd> initial = {});
  std::string name() const override { return "subgradient"; }
  void init(Agent& agent, const StepSize& step) override;
  void iterate(uint64_t t) override;

 private:
  std::optional<Eigen::VectorXd> initial_;
  Eigen::VectorXd x_;
};

// Consensus on both the iterate and a gradient tracker that estimates the
// network-average gradient. Unconstrained cost-coupled data, doubly
// stochastic weights, constant step.
class GradientTracking : public Algorithm {
 public:
  explicit GradientTracking(std::optional<Eigen::VectorXd> initial = {});
  std::string name() const override { return "gradient_tracking"; }
  void init(Agent& agent, const StepSize& step) override;
  void iterate(uint64_t t) override;

  const Eigen::VectorXd& tracker() const { return s_; }

 private:
  std::optional<Eigen::VectorXd> initial_;
  Eigen::VectorXd x_;
  Eigen::VectorXd s_;
  Eigen::VectorXd grad_;
};

// Agents exchange constraint bases and re-solve the shared objective over
// their own set plus everything received; the basis is the minimal row
// subset reproducing the tie-broken optimum. Finite-time agreement on
// connected graphs.
class ConstraintsConsensus : public Algorithm {
 public:
  ConstraintsConsensus() = default;
  std::string name() const override { return "constraints_consensus"; }
  void init(Agent& agent, const StepSize& step) override;
  void iterate(uint64_t t) override;

  // Basis rows as [a | b | kind] with kind 0 for <=, 1 for =.
  const Eigen::MatrixXd& basis_rows() const { return basis_; }
  const Eigen::VectorXd& estimate() const { return x_; }

 private:
  void solve_and_extract(const Eigen::MatrixXd& candidates);
  Eigen::VectorXd pack_basis() const;

  int dim_ = 0;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd x_;
};

// Consensus on dual multipliers of the coupling constraint; each round
// solves the nu-priced local problem and takes a projected dual ascent
// step. The reported iterate is the running average of the local minimizers.
class DualSubgradient : public Algorithm {
 public:
  DualSubgradient() = default;
  std::string name() const override { return "dual_subgradient"; }
  void init(Agent& agent, const StepSize& step) override;
  void iterate(uint64_t t) override;

  const Eigen::VectorXd& multiplier() const { return mu_; }
  const Eigen::VectorXd& average() const { return xbar_; }

 private:
  Eigen::VectorXd solve_priced(const Eigen::VectorXd& nu, uint64_t t);

  int dim_ = 0;
  int coupling_dim_ = 0;
  Eigen::MatrixXd g_mat_;
  Eigen::VectorXd g_off_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd xbar_;
  Eigen::VectorXd x_;
};

// Right-hand-side allocation splitting: each agent solves its local problem
// against its allocation y_i (relaxed by an exact-penalty slack), prices it
// with the allocation duals, and shifts allocation toward neighbors with
// higher prices. The allocation sum is conserved exactly.
class PrimalDecomposition : public Algorithm {
 public:
  explicit PrimalDecomposition(double penalty = 1e3,
                               std::optional<Eigen::VectorXd> initial_allocation = {});
  std::string name() const override { return "primal_decomposition"; }
  void init(Agent& agent, const StepSize& step) override;
  void iterate(uint64_t t) override;

  const Eigen::VectorXd& allocation() const { return y_; }
  const Eigen::VectorXd& multiplier() const { return mu_; }

 private:
  void solve_local(uint64_t t);

  double penalty_;
  std::optional<Eigen::VectorXd> initial_allocation_;
  int dim_ = 0;
  int coupling_dim_ = 0;
  Eigen::MatrixXd g_mat_;
  Eigen::VectorXd g_off_;
  std::vector<Constraint> lifted_set_;  // local set over (x, rho)
  Eigen::VectorXd y_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd x_;
};

// Runs init plus `iterations` synchronous rounds, with a barrier separating
// consecutive rounds; returns the per-round history (length iterations + 1).
History run(Algorithm& algorithm, Agent& agent, uint64_t iterations,
            const StepSize& step);

}  // namespace dopt
