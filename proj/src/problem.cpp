#include "dopt/problem.hpp"

#include <algorithm>
#include <stdexcept>

namespace dopt {

namespace {

struct FlatSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  std::vector<RowSense> senses;
};

FlatSystem flatten(const std::vector<Constraint>& constraints, int dim) {
  Eigen::Index rows = 0;
  for (const auto& c : constraints) {
    if (!c.is_affine())
      throw std::invalid_argument(
          "nonaffine constraints are not supported by the embedded solvers");
    rows += c.rows();
  }
  FlatSystem fs;
  fs.a = Eigen::MatrixXd::Zero(rows, dim);
  fs.b = Eigen::VectorXd::Zero(rows);
  fs.senses.resize(static_cast<size_t>(rows));
  Eigen::Index at = 0;
  for (const auto& c : constraints) {
    bool eq = c.kind() == ConstraintKind::affine_equality;
    for (Eigen::Index r = 0; r < c.rows(); ++r, ++at) {
      fs.a.row(at) = c.a().row(r);
      fs.b(at) = c.b()(r);
      fs.senses[static_cast<size_t>(at)] = eq ? RowSense::eq : RowSense::le;
    }
  }
  return fs;
}

Eigen::VectorXd affine_cost_vector(const Expression& objective, int dim) {
  Eigen::MatrixXd m;
  Eigen::VectorXd q;
  objective.affine_coefficients(dim, m, q);
  return m.row(0).transpose();
}

}  // namespace

int Problem::dim() const {
  int d = objective.input_dim();
  for (const auto& c : constraints) {
    if (d < 0)
      d = c.dim();
    else if (c.dim() != d)
      throw std::invalid_argument("constraint dimension mismatch");
  }
  if (d < 1)
    throw std::invalid_argument("cannot infer problem dimension");
  return d;
}

double max_violation(const std::vector<Constraint>& constraints,
                     const Eigen::VectorXd& x) {
  double v = 0.0;
  for (const auto& c : constraints) v = std::max(v, c.violation(x));
  return v;
}

Solution solve(const Problem& p, const SolverOptions& opts) {
  const int d = p.dim();
  if (p.objective.output_dim() != 1)
    throw std::invalid_argument("objective must be scalar");

  switch (p.objective.curvature()) {
    case Curvature::affine: {
      FlatSystem fs = flatten(p.constraints, d);
      Solution sol = simplex(
          StandardFormLP::with_free_bounds(affine_cost_vector(p.objective, d),
                                           fs.a, fs.b, fs.senses),
          opts);
      if (sol.status == SolveStatus::optimal)
        sol.objective_value = p.objective.evaluate_scalar(sol.x);
      return sol;
    }
    case Curvature::quadratic: {
      flatten(p.constraints, d);  // reject nonaffine constraints up front
      Eigen::MatrixXd pm;
      Eigen::VectorXd q;
      double r = 0.0;
      p.objective.quadratic_coefficients(d, pm, q, r);
      Solution sol = active_set_qp(pm, q, p.constraints, opts);
      if (sol.status == SolveStatus::optimal)
        sol.objective_value = p.objective.evaluate_scalar(sol.x);
      return sol;
    }
    case Curvature::smooth_convex:
      return projected_gradient(p.objective, p.constraints, opts);
  }
  throw std::logic_error("unreachable");
}

Solution tie_broken_solve(const Problem& p, const SolverOptions& opts) {
  const int d = p.dim();
  if (p.objective.output_dim() != 1)
    throw std::invalid_argument("objective must be scalar");

  if (p.objective.curvature() == Curvature::affine) {
    FlatSystem fs = flatten(p.constraints, d);
    Solution sol = lexicographic_solve(
        StandardFormLP::with_free_bounds(affine_cost_vector(p.objective, d),
                                         fs.a, fs.b, fs.senses),
        opts);
    if (sol.status == SolveStatus::optimal)
      sol.objective_value = p.objective.evaluate_scalar(sol.x);
    return sol;
  }
  if (p.objective.curvature() == Curvature::quadratic) {
    flatten(p.constraints, d);
    Eigen::MatrixXd pm;
    Eigen::VectorXd q;
    double r = 0.0;
    p.objective.quadratic_coefficients(d, pm, q, r);
    Solution first = active_set_qp(pm, q, p.constraints, opts);
    if (first.status != SolveStatus::optimal) return first;

    // The optimal face of a convex quadratic is exactly the feasible set
    // intersected with {P x = P x1, q'x = q'x1}; pick its min-norm point.
    std::vector<Constraint> face = p.constraints;
    face.push_back(Constraint::affine_eq(pm, pm * first.x));
    face.push_back(Constraint::row_eq(q, q.dot(first.x)));
    Solution sol = active_set_qp(Eigen::MatrixXd::Identity(d, d),
                                 Eigen::VectorXd::Zero(d), face, opts);
    if (sol.status == SolveStatus::optimal) {
      sol.objective_value = p.objective.evaluate_scalar(sol.x);
      sol.dual_values.resize(0);
    }
    return sol;
  }
  throw std::invalid_argument(
      "tie-broken solve requires an affine or quadratic objective");
}

}  // namespace dopt
