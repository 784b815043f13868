#pragma once

#include <vector>

#include "dopt/constraint.hpp"
#include "dopt/expression.hpp"
#include "dopt/solvers.hpp"

namespace dopt {

struct Problem {
  Expression objective;
  std::vector<Constraint> constraints;

  // Decision dimension, inferred from the objective and constraints; throws
  // if they disagree or none of them pins a dimension.
  int dim() const;
};

// Per-agent data for the three distributed set-ups.

// Sum-of-costs set-up: minimize sum_i cost_i(x) over a shared decision x
// constrained to the intersection of the local sets.
struct CostCoupledLocal {
  Expression cost;
  std::vector<Constraint> local_set;
};

// Shared-cost set-up: every agent holds the same objective but only its own
// slice of the constraints.
struct CommonCostLocal {
  Expression cost;
  std::vector<Constraint> local_set;
};

// Coupled-resource set-up: agent i owns x_i, its local set, and a coupling
// map g_i; the network must satisfy sum_i g_i(x_i) <= 0 componentwise.
struct ConstraintCoupledLocal {
  Expression cost;
  std::vector<Constraint> local_set;
  Expression coupling;
};

double max_violation(const std::vector<Constraint>& constraints,
                     const Eigen::VectorXd& x);

// Dispatches on structure: affine objective over affine constraints goes to
// the simplex, quadratic to the active-set method, smooth convex to
// projected gradient. Duals (when produced) follow the flattened row order
// of the constraint list.
Solution solve(const Problem& p, const SolverOptions& opts = {});

// Like solve, but returns a unique, row-order-independent optimum: the
// lexicographically smallest one for affine objectives, the minimum-norm
// point of the optimal face for quadratic ones. Used wherever different
// agents must independently arrive at the same point.
Solution tie_broken_solve(const Problem& p, const SolverOptions& opts = {});

}  // namespace dopt
