#include "dopt/expression.hpp"

#include <cmath>
#include <stdexcept>

namespace dopt {
namespace detail {

namespace {
void check_dims_match(int a, int b) {
  if (a >= 0 && b >= 0 && a != b)
    throw std::invalid_argument("expression dimension mismatch: " +
                                std::to_string(a) + " vs " +
                                std::to_string(b));
}
int merge_dims(int a, int b) {
  check_dims_match(a, b);
  return a >= 0 ? a : b;
}
}  // namespace

struct Node {
  int in_dim = -1;
  int out_dim = 0;
  Curvature curvature = Curvature::affine;

  virtual ~Node() = default;
  virtual Eigen::VectorXd eval(const Eigen::VectorXd& x) const = 0;
  // Accumulates J(x)' * cotangent into the gradient w.r.t. the root
  // variable (reverse-mode sweep).
  virtual Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                              const Eigen::VectorXd& cotangent) const = 0;
};

struct VariableNode final : Node {
  explicit VariableNode(int dim) {
    if (dim < 1) throw std::invalid_argument("variable dimension must be >= 1");
    in_dim = dim;
    out_dim = dim;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override { return x; }
  Eigen::VectorXd vjp(const Eigen::VectorXd&,
                      const Eigen::VectorXd& ct) const override {
    return ct;
  }
};

struct ConstantNode final : Node {
  Eigen::VectorXd value;
  explicit ConstantNode(Eigen::VectorXd v) : value(std::move(v)) {
    in_dim = -1;
    out_dim = static_cast<int>(value.size());
  }
  Eigen::VectorXd eval(const Eigen::VectorXd&) const override { return value; }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(x.size());
  }
};

struct AffineNode final : Node {
  Eigen::MatrixXd m;
  Eigen::VectorXd q;
  std::shared_ptr<const Node> inner;
  AffineNode(Eigen::MatrixXd m_, Eigen::VectorXd q_,
             std::shared_ptr<const Node> inner_)
      : m(std::move(m_)), q(std::move(q_)), inner(std::move(inner_)) {
    if (m.rows() != q.size())
      throw std::invalid_argument("affine: M rows must match q size");
    check_dims_match(static_cast<int>(m.cols()), inner->out_dim);
    in_dim = inner->in_dim;
    out_dim = static_cast<int>(m.rows());
    curvature = inner->curvature;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    return m * inner->eval(x) + q;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    return inner->vjp(x, m.transpose() * ct);
  }
};

struct QuadraticNode final : Node {
  Eigen::MatrixXd p;
  Eigen::VectorXd q;
  double r;
  std::shared_ptr<const Node> inner;
  QuadraticNode(Eigen::MatrixXd p_, Eigen::VectorXd q_, double r_,
                std::shared_ptr<const Node> inner_)
      : p(std::move(p_)), q(std::move(q_)), r(r_), inner(std::move(inner_)) {
    if (p.rows() != p.cols() || p.rows() != q.size())
      throw std::invalid_argument("quadratic form: inconsistent dimensions");
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("quadratic form: P must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument("quadratic form: P must be PSD");
    if (inner->curvature != Curvature::affine)
      throw std::invalid_argument("quadratic form needs an affine inner");
    check_dims_match(static_cast<int>(p.rows()), inner->out_dim);
    in_dim = inner->in_dim;
    out_dim = 1;
    curvature = Curvature::quadratic;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd e = inner->eval(x);
    Eigen::VectorXd out(1);
    out(0) = 0.5 * e.dot(p * e) + q.dot(e) + r;
    return out;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    Eigen::VectorXd e = inner->eval(x);
    return inner->vjp(x, ct(0) * (p * e + q));
  }
};

struct SquaredNormNode final : Node {
  std::shared_ptr<const Node> inner;
  explicit SquaredNormNode(std::shared_ptr<const Node> inner_)
      : inner(std::move(inner_)) {
    if (inner->curvature != Curvature::affine)
      throw std::invalid_argument(
          "squared norm of a non-affine inner is not convex in general");
    in_dim = inner->in_dim;
    out_dim = 1;
    curvature = Curvature::quadratic;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd e = inner->eval(x);
    Eigen::VectorXd out(1);
    out(0) = e.squaredNorm();
    return out;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    return inner->vjp(x, 2.0 * ct(0) * inner->eval(x));
  }
};

struct LogisticNode final : Node {
  std::shared_ptr<const Node> inner;
  explicit LogisticNode(std::shared_ptr<const Node> inner_)
      : inner(std::move(inner_)) {
    if (inner->out_dim != 1)
      throw std::invalid_argument("logistic needs a scalar inner");
    if (inner->curvature != Curvature::affine)
      throw std::invalid_argument("logistic needs an affine inner");
    in_dim = inner->in_dim;
    out_dim = 1;
    curvature = Curvature::smooth_convex;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    const double z = inner->eval(x)(0);
    Eigen::VectorXd out(1);
    // log(1 + e^z), stable on both tails.
    out(0) = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return out;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    const double z = inner->eval(x)(0);
    const double sig = z > 0 ? 1.0 / (1.0 + std::exp(-z))
                             : std::exp(z) / (1.0 + std::exp(z));
    Eigen::VectorXd c(1);
    c(0) = ct(0) * sig;
    return inner->vjp(x, c);
  }
};

struct SumNode final : Node {
  std::vector<std::shared_ptr<const Node>> terms;
  explicit SumNode(std::vector<std::shared_ptr<const Node>> terms_)
      : terms(std::move(terms_)) {
    if (terms.empty()) throw std::invalid_argument("empty sum");
    in_dim = -1;
    out_dim = terms.front()->out_dim;
    for (const auto& t : terms) {
      in_dim = merge_dims(in_dim, t->in_dim);
      if (t->out_dim != out_dim)
        throw std::invalid_argument("sum terms must share output dimension");
      curvature = std::max(curvature, t->curvature);
    }
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    Eigen::VectorXd acc = terms.front()->eval(x);
    for (std::size_t k = 1; k < terms.size(); ++k) acc += terms[k]->eval(x);
    return acc;
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    Eigen::VectorXd acc = terms.front()->vjp(x, ct);
    for (std::size_t k = 1; k < terms.size(); ++k) acc += terms[k]->vjp(x, ct);
    return acc;
  }
};

struct ScaleNode final : Node {
  double c;
  std::shared_ptr<const Node> inner;
  ScaleNode(double c_, std::shared_ptr<const Node> inner_)
      : c(c_), inner(std::move(inner_)) {
    if (c < 0.0)
      throw std::invalid_argument(
          "negative scale of a convex expression rejected (nonconvex)");
    in_dim = inner->in_dim;
    out_dim = inner->out_dim;
    curvature = inner->curvature;
  }
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const override {
    return c * inner->eval(x);
  }
  Eigen::VectorXd vjp(const Eigen::VectorXd& x,
                      const Eigen::VectorXd& ct) const override {
    return inner->vjp(x, c * ct);
  }
};

}  // namespace detail

using detail::Node;

Expression::Expression(std::shared_ptr<const Node> node)
    : node_(std::move(node)) {}

Expression Expression::variable(int dim) {
  return Expression(std::make_shared<detail::VariableNode>(dim));
}

Expression Expression::constant(const Eigen::VectorXd& value) {
  return Expression(std::make_shared<detail::ConstantNode>(value));
}

Expression Expression::constant(double value) {
  Eigen::VectorXd v(1);
  v(0) = value;
  return constant(v);
}

Expression Expression::affine(const Eigen::MatrixXd& m,
                              const Eigen::VectorXd& q) {
  auto var = std::make_shared<detail::VariableNode>(static_cast<int>(m.cols()));
  return Expression(std::make_shared<detail::AffineNode>(m, q, var));
}

Expression Expression::affine_row(const Eigen::VectorXd& a, double b) {
  Eigen::MatrixXd m = a.transpose();
  Eigen::VectorXd q(1);
  q(0) = b;
  return affine(m, q);
}

Expression Expression::quadratic_form(const Eigen::MatrixXd& p,
                                      const Eigen::VectorXd& q, double r) {
  auto var = std::make_shared<detail::VariableNode>(static_cast<int>(p.rows()));
  return Expression(std::make_shared<detail::QuadraticNode>(p, q, r, var));
}

Expression Expression::squared_norm(const Expression& inner) {
  return Expression(std::make_shared<detail::SquaredNormNode>(inner.node_));
}

Expression Expression::logistic(const Expression& inner) {
  return Expression(std::make_shared<detail::LogisticNode>(inner.node_));
}

Expression Expression::sum(const std::vector<Expression>& terms) {
  std::vector<std::shared_ptr<const Node>> nodes;
  nodes.reserve(terms.size());
  for (const auto& t : terms) nodes.push_back(t.node_);
  return Expression(std::make_shared<detail::SumNode>(std::move(nodes)));
}

Expression Expression::scale(double c, const Expression& inner) {
  return Expression(std::make_shared<detail::ScaleNode>(c, inner.node_));
}

int Expression::input_dim() const { return node_->in_dim; }
int Expression::output_dim() const { return node_->out_dim; }
Curvature Expression::curvature() const { return node_->curvature; }

Eigen::VectorXd Expression::evaluate(const Eigen::VectorXd& x) const {
  detail::check_dims_match(node_->in_dim, static_cast<int>(x.size()));
  return node_->eval(x);
}

double Expression::evaluate_scalar(const Eigen::VectorXd& x) const {
  if (node_->out_dim != 1)
    throw std::invalid_argument("expression is not scalar-valued");
  return evaluate(x)(0);
}

Eigen::VectorXd Expression::subgradient(const Eigen::VectorXd& x) const {
  if (node_->out_dim != 1)
    throw std::invalid_argument("subgradient needs a scalar expression");
  detail::check_dims_match(node_->in_dim, static_cast<int>(x.size()));
  Eigen::VectorXd one(1);
  one(0) = 1.0;
  return node_->vjp(x, one);
}

void Expression::affine_coefficients(int dim, Eigen::MatrixXd& m,
                                     Eigen::VectorXd& q) const {
  if (!is_affine())
    throw std::invalid_argument("affine coefficients of a non-affine expression");
  detail::check_dims_match(node_->in_dim, dim);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  q = node_->eval(zero);
  m.resize(q.size(), dim);
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = zero;
    e(j) = 1.0;
    m.col(j) = node_->eval(e) - q;
  }
}

void Expression::quadratic_coefficients(int dim, Eigen::MatrixXd& p,
                                        Eigen::VectorXd& q, double& r) const {
  if (!is_quadratic())
    throw std::invalid_argument(
        "quadratic coefficients of a non-quadratic expression");
  if (node_->out_dim != 1)
    throw std::invalid_argument("quadratic extraction needs a scalar expression");
  detail::check_dims_match(node_->in_dim, dim);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  r = node_->eval(zero)(0);
  q.resize(dim);
  p.resize(dim, dim);
  std::vector<double> plus(dim), minus(dim);
  for (int j = 0; j < dim; ++j) {
    Eigen::VectorXd e = zero;
    e(j) = 1.0;
    plus[j] = node_->eval(e)(0);
    e(j) = -1.0;
    minus[j] = node_->eval(e)(0);
    q(j) = 0.5 * (plus[j] - minus[j]);
    p(j, j) = plus[j] + minus[j] - 2.0 * r;
  }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      Eigen::VectorXd e = zero;
      e(i) = 1.0;
      e(j) = 1.0;
      const double pij = node_->eval(e)(0) - plus[i] - plus[j] + r;
      p(i, j) = pij;
      p(j, i) = pij;
    }
}

Expression Expression::operator+(const Expression& other) const {
  return sum({*this, other});
}

Expression operator*(double c, const Expression& e) {
  return Expression::scale(c, e);
}

Expression logistic_loss_term(const Eigen::VectorXd& p, double label) {
  if (label != 1.0 && label != -1.0)
    throw std::invalid_argument("label must be +1 or -1");
  const int d = static_cast<int>(p.size());
  Eigen::VectorXd a(d + 1);
  a.head(d) = -label * p;
  a(d) = -label;
  return Expression::logistic(Expression::affine_row(a, 0.0));
}

}  // namespace dopt
