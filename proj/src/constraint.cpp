#include "dopt/constraint.hpp"

#include <limits>
#include <stdexcept>

namespace dopt {

namespace {
void check_shape(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  if (a.rows() != b.size())
    throw std::invalid_argument("constraint rows must match rhs size");
  if (a.rows() == 0) throw std::invalid_argument("empty constraint");
}
}  // namespace

Constraint Constraint::affine_le(const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& b) {
  check_shape(a, b);
  Constraint c;
  c.kind_ = ConstraintKind::affine_inequality;
  c.a_ = a;
  c.b_ = b;
  return c;
}

Constraint Constraint::affine_ge(const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& b) {
  return affine_le(-a, -b);
}

Constraint Constraint::affine_eq(const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& b) {
  check_shape(a, b);
  Constraint c;
  c.kind_ = ConstraintKind::affine_equality;
  c.a_ = a;
  c.b_ = b;
  return c;
}

Constraint Constraint::row_le(const Eigen::VectorXd& a, double b) {
  Eigen::VectorXd rhs(1);
  rhs(0) = b;
  return affine_le(a.transpose(), rhs);
}

Constraint Constraint::row_ge(const Eigen::VectorXd& a, double b) {
  Eigen::VectorXd rhs(1);
  rhs(0) = b;
  return affine_ge(a.transpose(), rhs);
}

Constraint Constraint::row_eq(const Eigen::VectorXd& a, double b) {
  Eigen::VectorXd rhs(1);
  rhs(0) = b;
  return affine_eq(a.transpose(), rhs);
}

Constraint Constraint::box(const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw std::invalid_argument("box bounds size mismatch");
  if ((hi - lo).minCoeff() < 0.0)
    throw std::invalid_argument("box has lo > hi");
  Eigen::MatrixXd a(2 * d, d);
  a << Eigen::MatrixXd::Identity(d, d), -Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b(2 * d);
  b << hi, -lo;
  return affine_le(a, b);
}

Constraint Constraint::le(const Expression& expr, const Eigen::VectorXd& rhs) {
  if (expr.output_dim() != rhs.size())
    throw std::invalid_argument("constraint rhs dimension mismatch");
  if (expr.is_affine()) {
    const int d = expr.input_dim();
    if (d < 0)
      throw std::invalid_argument("constraint on a dimensionless constant");
    Eigen::MatrixXd m;
    Eigen::VectorXd q;
    expr.affine_coefficients(d, m, q);
    return affine_le(m, rhs - q);
  }
  Constraint c;
  c.kind_ = ConstraintKind::convex_inequality;
  // Stored canonically as expr - rhs <= 0 (rhs folded into b_ for violation).
  c.b_ = rhs;
  c.expr_ = expr;
  return c;
}

Constraint Constraint::le(const Expression& expr, double rhs) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(expr.output_dim(), rhs);
  return le(expr, v);
}

Constraint Constraint::ge(const Expression& expr, const Eigen::VectorXd& rhs) {
  if (!expr.is_affine())
    throw std::invalid_argument(
        "lower-bounding a convex expression is nonconvex; rejected");
  if (expr.output_dim() != rhs.size())
    throw std::invalid_argument("constraint rhs dimension mismatch");
  const int d = expr.input_dim();
  if (d < 0)
    throw std::invalid_argument("constraint on a dimensionless constant");
  Eigen::MatrixXd m;
  Eigen::VectorXd q;
  expr.affine_coefficients(d, m, q);
  return affine_ge(m, rhs - q);
}

Constraint Constraint::ge(const Expression& expr, double rhs) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(expr.output_dim(), rhs);
  return ge(expr, v);
}

int Constraint::rows() const {
  if (kind_ == ConstraintKind::convex_inequality)
    return expr_->output_dim();
  return static_cast<int>(a_.rows());
}

int Constraint::dim() const {
  if (kind_ == ConstraintKind::convex_inequality) return expr_->input_dim();
  return static_cast<int>(a_.cols());
}

double Constraint::violation(const Eigen::VectorXd& x) const {
  switch (kind_) {
    case ConstraintKind::affine_inequality:
      return (a_ * x - b_).maxCoeff();
    case ConstraintKind::affine_equality:
      return (a_ * x - b_).cwiseAbs().maxCoeff();
    case ConstraintKind::convex_inequality:
      return (expr_->evaluate(x) - b_).maxCoeff();
  }
  return std::numeric_limits<double>::quiet_NaN();
}

const Eigen::MatrixXd& Constraint::a() const {
  if (kind_ == ConstraintKind::convex_inequality)
    throw std::logic_error("convex constraint has no affine rows");
  return a_;
}

const Eigen::VectorXd& Constraint::b() const { return b_; }

const Expression& Constraint::expr() const {
  if (kind_ != ConstraintKind::convex_inequality)
    throw std::logic_error("affine constraint stores rows, not an expression");
  return *expr_;
}

Constraint canonicalize(const Constraint& c) { return c; }

AffineSystem assemble_affine(const std::vector<Constraint>& constraints,
                             int dim) {
  int n_ineq = 0, n_eq = 0;
  for (const auto& c : constraints) {
    if (!c.is_affine())
      throw std::invalid_argument("affine assembly hit a convex constraint");
    (c.kind() == ConstraintKind::affine_equality ? n_eq : n_ineq) += c.rows();
  }
  AffineSystem s;
  s.a_ineq.resize(n_ineq, dim);
  s.b_ineq.resize(n_ineq);
  s.a_eq.resize(n_eq, dim);
  s.b_eq.resize(n_eq);
  int ri = 0, re = 0;
  for (const auto& c : constraints) {
    if (c.a().cols() != dim)
      throw std::invalid_argument("constraint dimension mismatch in assembly");
    if (c.kind() == ConstraintKind::affine_equality) {
      s.a_eq.middleRows(re, c.rows()) = c.a();
      s.b_eq.segment(re, c.rows()) = c.b();
      re += c.rows();
    } else {
      s.a_ineq.middleRows(ri, c.rows()) = c.a();
      s.b_ineq.segment(ri, c.rows()) = c.b();
      ri += c.rows();
    }
  }
  return s;
}

std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> detect_box(
    const std::vector<Constraint>& constraints, int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, -inf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, inf);
  for (const auto& c : constraints) {
    if (c.kind() != ConstraintKind::affine_inequality) return std::nullopt;
    const auto& a = c.a();
    if (a.cols() != dim) return std::nullopt;
    for (int r = 0; r < a.rows(); ++r) {
      int nz = -1;
      for (int j = 0; j < dim; ++j) {
        if (a(r, j) != 0.0) {
          if (nz >= 0) return std::nullopt;  // row couples two coordinates
          nz = j;
        }
      }
      if (nz < 0) {
        if (c.b()(r) < 0.0) return std::nullopt;  // 0 <= negative: infeasible
        continue;
      }
      const double coef = a(r, nz), rhs = c.b()(r);
      if (coef > 0.0)
        hi(nz) = std::min(hi(nz), rhs / coef);
      else
        lo(nz) = std::max(lo(nz), rhs / coef);
    }
  }
  return std::make_pair(lo, hi);
}

}  // namespace dopt
