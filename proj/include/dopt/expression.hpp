#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace dopt {

// Convexity class of an expression, ordered: every affine expression is
// also quadratic, every quadratic also smooth convex.
enum class Curvature { affine, quadratic, smooth_convex };

namespace detail {
struct Node;
}

// Immutable symbolic function of a single vector variable. The variant set
// is closed (variable, constant, affine map, PSD quadratic form, squared
// norm, logistic of an affine scalar, sum, nonnegative scale) so values and
// gradients are exact, not approximated.
class Expression {
 public:
  static Expression variable(int dim);
  static Expression constant(const Eigen::VectorXd& value);
  static Expression constant(double value);
  // M * x + q over the variable.
  static Expression affine(const Eigen::MatrixXd& m, const Eigen::VectorXd& q);
  // Single affine row: a'x + b.
  static Expression affine_row(const Eigen::VectorXd& a, double b);
  // 0.5 x'Px + q'x + r; P must be symmetric PSD.
  static Expression quadratic_form(const Eigen::MatrixXd& p,
                                   const Eigen::VectorXd& q, double r);
  // |inner|^2; inner must be affine so the result stays convex.
  static Expression squared_norm(const Expression& inner);
  // log(1 + exp(inner)); inner must be an affine scalar.
  static Expression logistic(const Expression& inner);
  static Expression sum(const std::vector<Expression>& terms);
  // c * inner with c >= 0 (negative scaling would break convexity).
  static Expression scale(double c, const Expression& inner);

  int input_dim() const;   // -1 when any dimension fits (pure constants)
  int output_dim() const;
  Curvature curvature() const;
  bool is_affine() const { return curvature() == Curvature::affine; }
  bool is_quadratic() const { return curvature() != Curvature::smooth_convex; }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;
  double evaluate_scalar(const Eigen::VectorXd& x) const;
  // Valid subgradient; equals the gradient everywhere (all variants are
  // differentiable). Scalar-valued expressions only.
  Eigen::VectorXd subgradient(const Eigen::VectorXd& x) const;

  // Exact coefficient extraction by probing at the basis points; only legal
  // for the matching curvature class.
  void affine_coefficients(int dim, Eigen::MatrixXd& m,
                           Eigen::VectorXd& q) const;
  void quadratic_coefficients(int dim, Eigen::MatrixXd& p, Eigen::VectorXd& q,
                              double& r) const;

  Expression operator+(const Expression& other) const;

 private:
  explicit Expression(std::shared_ptr<const detail::Node> node);
  std::shared_ptr<const detail::Node> node_;
};

Expression operator*(double c, const Expression& e);

// log(1 + exp(-(w'p + b) * label)) as a function of the stacked (w, b)
// variable of dimension p.size() + 1.
Expression logistic_loss_term(const Eigen::VectorXd& p, double label);

}  // namespace dopt
