#include "dopt/experiments.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "dopt/message.hpp"
#include "dopt/rng.hpp"

namespace dopt {

namespace {

constexpr double k_mean_pos[2] = {0.0, 0.0};
constexpr double k_mean_neg[2] = {3.0, 2.0};

std::uint64_t attempt_seed(std::uint64_t seed, int attempt) {
  if (attempt == 0) return seed;
  std::uint64_t s =
      seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
  return Rng::splitmix64(s);
}

std::vector<ClassificationData> draw_clusters(int n, std::uint64_t seed,
                                              double stddev, double c_reg) {
  if (n <= 0) throw std::invalid_argument("need at least one agent");
  std::vector<ClassificationData> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    int m = static_cast<int>(rng.uniform_int(4, 10));
    ClassificationData& d = out[static_cast<size_t>(i)];
    d.points.resize(m, 2);
    d.labels.resize(m);
    d.c_reg = c_reg;
    for (int j = 0; j < m; ++j) {
      double label = rng.uniform() < 0.5 ? 1.0 : -1.0;
      const double* mean = label > 0 ? k_mean_pos : k_mean_neg;
      d.labels(j) = label;
      d.points(j, 0) = mean[0] + stddev * rng.normal();
      d.points(j, 1) = mean[1] + stddev * rng.normal();
    }
  }
  return out;
}

bool has_both_labels(const std::vector<ClassificationData>& data) {
  bool pos = false;
  bool neg = false;
  for (const ClassificationData& d : data)
    for (int j = 0; j < d.labels.size(); ++j)
      (d.labels(j) > 0 ? pos : neg) = true;
  return pos && neg;
}

int total_points(const std::vector<ClassificationData>& data) {
  int total = 0;
  for (const ClassificationData& d : data)
    total += static_cast<int>(d.points.rows());
  return total;
}

// Margin rows l_j (w'p_j + b) >= 1 pooled over all agents.
StandardFormLP margin_lp(const std::vector<ClassificationData>& data,
                         const Eigen::VectorXd& cost) {
  int total = total_points(data);
  Eigen::MatrixXd a(total, 3);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(total);
  int r = 0;
  for (const ClassificationData& d : data) {
    for (int j = 0; j < d.points.rows(); ++j, ++r) {
      double l = d.labels(j);
      a(r, 0) = l * d.points(j, 0);
      a(r, 1) = l * d.points(j, 1);
      a(r, 2) = l;
    }
  }
  return StandardFormLP::with_free_bounds(
      cost, a, b, std::vector<RowSense>(static_cast<size_t>(total), RowSense::ge));
}

bool separable(const std::vector<ClassificationData>& data) {
  Solution s = simplex(margin_lp(data, Eigen::VectorXd::Zero(3)));
  return s.status == SolveStatus::optimal;
}

}  // namespace

std::vector<ClassificationData> gen_classification(int n, std::uint64_t seed,
                                                   double c_reg) {
  if (c_reg < 0) throw std::invalid_argument("regularization must be >= 0");
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<ClassificationData> data =
        draw_clusters(n, attempt_seed(seed, attempt), 1.0, c_reg);
    if (has_both_labels(data)) return data;
  }
  throw std::runtime_error("could not draw both classes after 100 attempts");
}

std::vector<ClassificationData> gen_svm(int n, std::uint64_t seed) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<ClassificationData> data =
        draw_clusters(n, attempt_seed(seed, attempt), std::sqrt(0.2), 0.0);
    if (has_both_labels(data) && separable(data)) return data;
  }
  throw std::runtime_error("could not draw separable data after 100 attempts");
}

Expression local_logistic_objective(const ClassificationData& data, int n) {
  if (n <= 0) throw std::invalid_argument("need at least one agent");
  std::vector<Expression> terms;
  terms.reserve(static_cast<size_t>(data.points.rows()) + 1);
  for (int j = 0; j < data.points.rows(); ++j)
    terms.push_back(
        logistic_loss_term(data.points.row(j).transpose(), data.labels(j)));
  // Quadratic penalty on w only; b stays unregularized.
  Eigen::MatrixXd pick_w = Eigen::MatrixXd::Zero(2, 3);
  pick_w(0, 0) = 1.0;
  pick_w(1, 1) = 1.0;
  terms.push_back(Expression::scale(
      data.c_reg / (2.0 * n),
      Expression::squared_norm(
          Expression::affine(pick_w, Eigen::VectorXd::Zero(2)))));
  return Expression::sum(terms);
}

std::vector<Constraint> svm_constraints(const ClassificationData& data) {
  std::vector<Constraint> rows;
  rows.reserve(static_cast<size_t>(data.points.rows()));
  for (int j = 0; j < data.points.rows(); ++j) {
    double l = data.labels(j);
    Eigen::VectorXd a(3);
    a << l * data.points(j, 0), l * data.points(j, 1), l;
    rows.push_back(Constraint::row_ge(a, 1.0));
  }
  return rows;
}

CommonCostLocal local_svm_problem(const ClassificationData& data) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 0) = 1.0;
  p(1, 1) = 1.0;
  Expression cost = Expression::quadratic_form(p, Eigen::VectorXd::Zero(3), 0.0);
  return CommonCostLocal{cost, svm_constraints(data)};
}

double svm_violation(const std::vector<ClassificationData>& all,
                     const Eigen::VectorXd& wb) {
  if (wb.size() != 3) throw std::invalid_argument("expected (w, b) in R^3");
  double worst = std::numeric_limits<double>::infinity();
  for (const ClassificationData& d : all)
    for (int j = 0; j < d.points.rows(); ++j) {
      double margin =
          d.labels(j) * (d.points.row(j).dot(wb.head(2)) + wb(2));
      worst = std::min(worst, margin);
    }
  if (!std::isfinite(worst)) throw std::invalid_argument("no points given");
  return 1.0 - worst;
}

std::vector<MicrogridData> gen_microgrid(int n, int s, std::uint64_t seed,
                                         const MicrogridParams& params) {
  if (n <= 0) throw std::invalid_argument("need at least one agent");
  if (s <= 0) throw std::invalid_argument("horizon must be positive");
  if (params.u_min > params.u_max)
    throw std::invalid_argument("empty input box");
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::uint64_t base = attempt_seed(seed, attempt);
    std::vector<MicrogridData> data(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      Rng rng(base, static_cast<std::uint64_t>(i));
      MicrogridData& d = data[static_cast<size_t>(i)];
      d.a = rng.uniform(params.a_min, params.a_max);
      d.b = 1.0;
      d.c = 0.0;
      d.d = 1.0;
      d.x0 = rng.uniform(0.0, 1.0);
      d.u_min = params.u_min;
      d.u_max = params.u_max;
      d.stage_cost = -rng.uniform(params.cost_min, params.cost_max);
      d.budget = Eigen::VectorXd::Constant(s, params.budget_fraction * n);
    }
    if (centralized_microgrid(data).x.size() > 0) return data;
  }
  throw std::runtime_error("could not draw a feasible instance after 100 attempts");
}

ConstraintCoupledLocal local_microgrid_problem(const MicrogridData& data,
                                               int n) {
  if (n <= 0) throw std::invalid_argument("need at least one agent");
  int s = static_cast<int>(data.budget.size());
  if (s <= 0) throw std::invalid_argument("empty budget horizon");
  int dim = 2 * s;  // (x(1..S), u(0..S-1))

  // Dynamics: x(k+1) - a x(k) - b u(k) = 0, with x(0) a constant.
  Eigen::MatrixXd dyn = Eigen::MatrixXd::Zero(s, dim);
  Eigen::VectorXd dyn_rhs = Eigen::VectorXd::Zero(s);
  for (int k = 0; k < s; ++k) {
    dyn(k, k) = 1.0;         // x(k+1)
    dyn(k, s + k) = -data.b; // u(k)
    if (k == 0)
      dyn_rhs(0) = data.a * data.x0;
    else
      dyn(k, k - 1) = -data.a;
  }

  std::vector<Constraint> local_set;
  local_set.push_back(Constraint::affine_eq(dyn, dyn_rhs));
  for (int k = 0; k < s; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(s + k) = 1.0;
    local_set.push_back(Constraint::row_le(e, data.u_max));
    local_set.push_back(Constraint::row_ge(e, data.u_min));
  }

  Eigen::VectorXd cost_vec = Eigen::VectorXd::Zero(dim);
  cost_vec.tail(s).setConstant(data.stage_cost);
  Expression cost = Expression::affine_row(cost_vec, 0.0);

  // Coupling rows g_k = c x(k) + d u(k) - h_k / n for k = 0..S-1; x(0) is
  // constant so its contribution moves into the offset of row 0.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s, dim);
  Eigen::VectorXd g_off(s);
  for (int k = 0; k < s; ++k) {
    g(k, s + k) = data.d;
    if (k == 0)
      g_off(0) = data.c * data.x0 - data.budget(0) / n;
    else {
      g(k, k - 1) = data.c;
      g_off(k) = -data.budget(k) / n;
    }
  }
  Expression coupling = Expression::affine(g, g_off);
  return ConstraintCoupledLocal{cost, std::move(local_set), coupling};
}

OracleResult centralized_logistic(
    const std::vector<ClassificationData>& data) {
  int n = static_cast<int>(data.size());
  if (n == 0) throw std::invalid_argument("no data");
  std::vector<Expression> locals;
  locals.reserve(data.size());
  for (const ClassificationData& d : data)
    locals.push_back(local_logistic_objective(d, n));
  Expression pooled = Expression::sum(locals);
  // Gradient norm 1e-7 puts the reference point within ~1e-6 of the true
  // minimizer and its value within ~1e-13, far inside every tolerance that
  // consumes it; pushing further runs into double rounding of the line
  // search at this objective scale.
  SolverOptions opts;
  opts.max_iterations = 500000;
  opts.optimality_tol = 1e-7;
  Solution s = projected_gradient(pooled, {}, opts);
  if (s.status != SolveStatus::optimal)
    throw std::runtime_error(std::string("centralized logistic solve is ") +
                             to_string(s.status));
  return OracleResult{s.x, s.objective_value};
}

OracleResult centralized_svm(const std::vector<ClassificationData>& data) {
  if (data.empty()) throw std::invalid_argument("no data");
  std::vector<Constraint> rows;
  for (const ClassificationData& d : data) {
    std::vector<Constraint> local = svm_constraints(d);
    for (Constraint& c : local) rows.push_back(std::move(c));
  }
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
  p(0, 0) = 1.0;
  p(1, 1) = 1.0;
  Problem pooled{
      Expression::quadratic_form(p, Eigen::VectorXd::Zero(3), 0.0), rows};
  Solution s = tie_broken_solve(pooled);
  if (s.status != SolveStatus::optimal)
    throw std::runtime_error(std::string("centralized margin solve is ") +
                             to_string(s.status));
  return OracleResult{s.x, s.objective_value};
}

OracleResult centralized_microgrid(const std::vector<MicrogridData>& data) {
  int n = static_cast<int>(data.size());
  if (n == 0) throw std::invalid_argument("no data");
  int s = static_cast<int>(data[0].budget.size());
  int dim = 2 * s;

  // Stack the local blocks and pool the coupling rows sum_i g_i(x_i) <= 0.
  int rows_per_agent = s + 2 * s;  // dynamics + input box
  int total_rows = n * rows_per_agent + s;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(total_rows, n * dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(total_rows);
  std::vector<RowSense> senses(static_cast<size_t>(total_rows), RowSense::eq);
  Eigen::VectorXd cost = Eigen::VectorXd::Zero(n * dim);

  int r = 0;
  for (int i = 0; i < n; ++i) {
    const MicrogridData& d = data[static_cast<size_t>(i)];
    if (d.budget.size() != s)
      throw std::invalid_argument("mismatched budget horizons");
    int off = i * dim;
    for (int k = 0; k < s; ++k, ++r) {
      a(r, off + k) = 1.0;
      a(r, off + s + k) = -d.b;
      if (k == 0)
        b(r) = d.a * d.x0;
      else
        a(r, off + k - 1) = -d.a;
      senses[static_cast<size_t>(r)] = RowSense::eq;
    }
    for (int k = 0; k < s; ++k) {
      a(r, off + s + k) = 1.0;
      b(r) = d.u_max;
      senses[static_cast<size_t>(r)] = RowSense::le;
      ++r;
      a(r, off + s + k) = 1.0;
      b(r) = d.u_min;
      senses[static_cast<size_t>(r)] = RowSense::ge;
      ++r;
    }
    cost.segment(off + s, s).setConstant(d.stage_cost);
  }
  for (int k = 0; k < s; ++k, ++r) {
    double rhs = 0.0;
    for (int i = 0; i < n; ++i) {
      const MicrogridData& d = data[static_cast<size_t>(i)];
      int off = i * dim;
      a(r, off + s + k) = d.d;
      if (k == 0)
        rhs -= d.c * d.x0 - d.budget(0) / n;
      else {
        a(r, off + k - 1) = d.c;
        rhs += d.budget(k) / n;
      }
    }
    b(r) = rhs;
    senses[static_cast<size_t>(r)] = RowSense::le;
  }

  SolverOptions opts;
  opts.max_iterations = 200000;
  Solution sol =
      simplex(StandardFormLP::with_free_bounds(cost, a, b, senses), opts);
  if (sol.status != SolveStatus::optimal) return OracleResult{};
  return OracleResult{sol.x, sol.objective_value};
}

void write_classification_instance(
    const std::string& path, const std::vector<ClassificationData>& data) {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("n", Tensor::scalar(static_cast<double>(data.size())));
  if (!data.empty())
    entries.emplace_back("c_reg", Tensor::scalar(data[0].c_reg));
  for (size_t i = 0; i < data.size(); ++i) {
    std::string prefix = "agent" + std::to_string(i) + "/";
    entries.emplace_back(prefix + "points", Tensor::matrix(data[i].points));
    entries.emplace_back(prefix + "labels", Tensor::vector(data[i].labels));
  }
  write_tensor_archive(path, entries);
}

std::vector<ClassificationData> read_classification_instance(
    const std::string& path) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : read_tensor_archive(path)) by_name.emplace(name, t);
  auto fetch = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("instance file is missing entry " + name);
    return it->second;
  };
  int n = static_cast<int>(fetch("n").as_scalar());
  double c_reg = fetch("c_reg").as_scalar();
  std::vector<ClassificationData> data(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::string prefix = "agent" + std::to_string(i) + "/";
    ClassificationData& d = data[static_cast<size_t>(i)];
    d.points = fetch(prefix + "points").as_matrix();
    d.labels = fetch(prefix + "labels").as_vector();
    d.c_reg = c_reg;
    if (d.points.rows() != d.labels.size())
      throw std::runtime_error("instance file has mismatched point counts");
  }
  return data;
}

void write_microgrid_instance(const std::string& path,
                              const std::vector<MicrogridData>& data) {
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.emplace_back("n", Tensor::scalar(static_cast<double>(data.size())));
  if (!data.empty()) entries.emplace_back("budget", Tensor::vector(data[0].budget));
  for (size_t i = 0; i < data.size(); ++i) {
    const MicrogridData& d = data[i];
    Eigen::VectorXd params(8);
    params << d.a, d.b, d.c, d.d, d.x0, d.u_min, d.u_max, d.stage_cost;
    entries.emplace_back("agent" + std::to_string(i) + "/params",
                         Tensor::vector(params));
  }
  write_tensor_archive(path, entries);
}

std::vector<MicrogridData> read_microgrid_instance(const std::string& path) {
  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : read_tensor_archive(path)) by_name.emplace(name, t);
  auto fetch = [&](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("instance file is missing entry " + name);
    return it->second;
  };
  int n = static_cast<int>(fetch("n").as_scalar());
  Eigen::VectorXd budget = fetch("budget").as_vector();
  std::vector<MicrogridData> data(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd params =
        fetch("agent" + std::to_string(i) + "/params").as_vector();
    if (params.size() != 8)
      throw std::runtime_error("instance file has a malformed agent block");
    MicrogridData& d = data[static_cast<size_t>(i)];
    d.a = params(0);
    d.b = params(1);
    d.c = params(2);
    d.d = params(3);
    d.x0 = params(4);
    d.u_min = params(5);
    d.u_max = params(6);
    d.stage_cost = params(7);
    d.budget = budget;
  }
  return data;
}

}  // namespace dopt
