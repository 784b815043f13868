#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dopt/constraint.hpp"
#include "dopt/expression.hpp"

namespace dopt {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

const char* to_string(SolveStatus s);

struct Solution {
  Eigen::VectorXd x;
  double objective_value = 0.0;
  // Per-row multipliers in the caller's row order. Convention: for rows
  // a'x <= b the multiplier mu >= 0 satisfies grad f + A' mu = 0 at the
  // optimum (equality rows carry free-sign multipliers). Empty when the
  // backing solver produces no duals.
  Eigen::VectorXd dual_values;
  SolveStatus status = SolveStatus::optimal;
};

enum class RowSense { le, eq, ge };

// Dense LP: min c'x  s.t.  A x (sense) b,  lower <= x <= upper.
// Entries of lower/upper may be +-infinity.
struct StandardFormLP {
  Eigen::VectorXd c;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  std::vector<RowSense> senses;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static StandardFormLP with_free_bounds(const Eigen::VectorXd& c,
                                         const Eigen::MatrixXd& a,
                                         const Eigen::VectorXd& b,
                                         std::vector<RowSense> senses);
};

struct SolverOptions {
  int max_iterations = 20000;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-8;
  std::optional<Eigen::VectorXd> initial_point;
};

// Two-phase dense simplex with Bland's anti-cycling rule. Row duals are
// reported for every input row (sign convention above; `>=` rows get the
// multiplier of the equivalent negated `<=` row).
Solution simplex(const StandardFormLP& lp, const SolverOptions& opts = {});

// Among all optimal points, returns the lexicographically smallest one:
// the objective value is pinned, then x_0 is minimized, then x_1, and so
// on. Deterministic across machines; no duals.
Solution lexicographic_solve(const StandardFormLP& lp,
                             const SolverOptions& opts = {});

// Primal active-set method for min 0.5 x'Px + q'x over affine constraints,
// P symmetric PSD. Equality-constrained subproblems are solved through a
// complete orthogonal decomposition, so singular P picks the minimal-norm
// step; duals follow the Solution convention.
Solution active_set_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                       const std::vector<Constraint>& constraints,
                       const SolverOptions& opts = {});

// Projected gradient with halving backtracking (Armijo constant 1e-4) for
// smooth convex objectives over sets with computable projection. Stops when
// the unit-step gradient mapping ||x - proj(x - grad)|| falls below the
// optimality tolerance.
Solution projected_gradient(const Expression& f,
                            const std::vector<Constraint>& constraints,
                            const SolverOptions& opts = {});

// Euclidean projection: componentwise clip for pure boxes, otherwise the
// QP min ||y - x||^2 over the constraints.
Eigen::VectorXd project(const std::vector<Constraint>& constraints,
                        const Eigen::VectorXd& x);

}  // namespace dopt
