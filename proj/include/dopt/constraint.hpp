#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dopt/expression.hpp"

namespace dopt {

enum class ConstraintKind { affine_inequality, affine_equality, convex_inequality };

// Canonical-form constraint: affine rows A x <= b / A x = b, or a convex
// expression g(x) <= 0. `>=` forms are flipped at construction so there is
// exactly one stored orientation.
class Constraint {
 public:
  static Constraint affine_le(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
  static Constraint affine_ge(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
  static Constraint affine_eq(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);
  static Constraint row_le(const Eigen::VectorXd& a, double b);
  static Constraint row_ge(const Eigen::VectorXd& a, double b);
  static Constraint row_eq(const Eigen::VectorXd& a, double b);
  // lo <= x <= hi as 2d affine rows.
  static Constraint box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  // expr <= rhs. Affine expressions become affine rows; other convex
  // expressions are stored symbolically.
  static Constraint le(const Expression& expr, const Eigen::VectorXd& rhs);
  static Constraint le(const Expression& expr, double rhs);
  // expr >= rhs. Affine only: negating a general convex left side would
  // leave a nonconvex constraint, which is rejected.
  static Constraint ge(const Expression& expr, const Eigen::VectorXd& rhs);
  static Constraint ge(const Expression& expr, double rhs);

  ConstraintKind kind() const { return kind_; }
  bool is_affine() const { return kind_ != ConstraintKind::convex_inequality; }
  int rows() const;
  int dim() const;

  // Signed residual: max over rows of (lhs - rhs); equalities use the
  // absolute residual. satisfied(x, tol) <=> violation(x) <= tol.
  double violation(const Eigen::VectorXd& x) const;
  bool satisfied(const Eigen::VectorXd& x, double tol) const {
    return violation(x) <= tol;
  }

  const Eigen::MatrixXd& a() const;
  const Eigen::VectorXd& b() const;
  const Expression& expr() const;

 private:
  Constraint() = default;
  ConstraintKind kind_ = ConstraintKind::affine_inequality;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::optional<Expression> expr_;
};

// Already-canonical constraints pass through unchanged (construction
// canonicalizes eagerly, so this is the identity; kept for symmetry and the
// idempotence contract).
Constraint canonicalize(const Constraint& c);

// Stacked affine rows of a constraint list, split by sense. Throws if any
// constraint is non-affine.
struct AffineSystem {
  Eigen::MatrixXd a_ineq;  // a_ineq x <= b_ineq
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd a_eq;    // a_eq x = b_eq
  Eigen::VectorXd b_eq;
};
AffineSystem assemble_affine(const std::vector<Constraint>& constraints, int dim);

// Componentwise bounds when every constraint row restricts a single
// coordinate; empty when the set is not a pure box.
std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> detect_box(
    const std::vector<Constraint>& constraints, int dim);

}  // namespace dopt
