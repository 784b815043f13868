#include "dopt/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;

void pivot(Eigen::MatrixXd& t, Eigen::RowVectorXd& red, std::vector<int>& basis,
           int row, int col) {
  t.row(row) /= t(row, col);
  for (int i = 0; i < t.rows(); ++i) {
    if (i == row) continue;
    double f = t(i, col);
    if (f != 0.0) t.row(i) -= f * t.row(row);
  }
  double rf = red(col);
  if (rf != 0.0) red -= rf * t.row(row).head(red.size());
  red(col) = 0.0;
  basis[row] = col;
}

// Primal simplex with Bland's rule on the equality-form tableau t = [A | b],
// b >= 0, starting from the identity basis in `basis`. Only columns below
// `n_enterable` may enter. The tableau and basis are updated in place.
SolveStatus run_phase(Eigen::MatrixXd& t, std::vector<int>& basis,
                      const Eigen::VectorXd& cost, int n_enterable,
                      int max_iter) {
  const int m = static_cast<int>(t.rows());
  const int n = static_cast<int>(t.cols()) - 1;
  Eigen::VectorXd cb(m);
  for (int i = 0; i < m; ++i) cb(i) = cost(basis[i]);
  Eigen::RowVectorXd red =
      cost.transpose() - cb.transpose() * t.leftCols(n);
  for (int i = 0; i < m; ++i) red(basis[i]) = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    int enter = -1;
    for (int j = 0; j < n_enterable; ++j) {
      if (red(j) < -kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return SolveStatus::optimal;

    double best = kInf;
    for (int i = 0; i < m; ++i) {
      if (t(i, enter) > kPivotTol) {
        best = std::min(best, t(i, n) / t(i, enter));
      }
    }
    if (best == kInf) return SolveStatus::unbounded;

    int leave = -1;
    double window = best + 1e-12 * (1.0 + std::abs(best));
    for (int i = 0; i < m; ++i) {
      if (t(i, enter) > kPivotTol && t(i, n) / t(i, enter) <= window) {
        if (leave < 0 || basis[i] < basis[leave]) leave = i;
      }
    }
    pivot(t, red, basis, leave, enter);
  }
  return SolveStatus::iteration_limit;
}

void drop_row(Eigen::MatrixXd& t, std::vector<int>& basis,
              std::vector<int>& orig_row, int row) {
  const int m = static_cast<int>(t.rows());
  for (int i = row; i + 1 < m; ++i) t.row(i) = t.row(i + 1);
  t.conservativeResize(m - 1, Eigen::NoChange);
  basis.erase(basis.begin() + row);
  orig_row.erase(orig_row.begin() + row);
}

struct VarMap {
  enum Kind { shifted, mirrored, split } kind;
  double offset;
  int col;
  int neg_col;
};

void validate_lp(const StandardFormLP& lp) {
  const auto m = lp.a.rows();
  const auto n = lp.a.cols();
  if (n < 1) throw std::invalid_argument("lp has no variables");
  if (lp.c.size() != n || lp.lower.size() != n || lp.upper.size() != n)
    throw std::invalid_argument("lp column sizes disagree");
  if (lp.b.size() != m || static_cast<Eigen::Index>(lp.senses.size()) != m)
    throw std::invalid_argument("lp row sizes disagree");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lp.lower(j) > lp.upper(j))
      throw std::invalid_argument("lp has crossing variable bounds");
  }
}

}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::unbounded:
      return "unbounded";
    case SolveStatus::iteration_limit:
      return "iteration_limit";
  }
  return "unknown";
}

StandardFormLP StandardFormLP::with_free_bounds(const Eigen::VectorXd& c,
                                                const Eigen::MatrixXd& a,
                                                const Eigen::VectorXd& b,
                                                std::vector<RowSense> senses) {
  StandardFormLP lp;
  lp.c = c;
  lp.a = a;
  lp.b = b;
  lp.senses = std::move(senses);
  lp.lower = Eigen::VectorXd::Constant(c.size(), -kInf);
  lp.upper = Eigen::VectorXd::Constant(c.size(), kInf);
  return lp;
}

Solution simplex(const StandardFormLP& lp, const SolverOptions& opts) {
  validate_lp(lp);
  const int m0 = static_cast<int>(lp.a.rows());
  const int n0 = static_cast<int>(lp.a.cols());

  // Substitute variables so every standardized variable is >= 0:
  // finite lower -> shift, upper-only -> mirror, doubly free -> split.
  std::vector<VarMap> vmap(n0);
  int n_var = 0;
  int n_bound_rows = 0;
  for (int j = 0; j < n0; ++j) {
    if (lp.lower(j) > -kInf) {
      vmap[j] = {VarMap::shifted, lp.lower(j), n_var++, -1};
      if (lp.upper(j) < kInf) ++n_bound_rows;
    } else if (lp.upper(j) < kInf) {
      vmap[j] = {VarMap::mirrored, lp.upper(j), n_var++, -1};
    } else {
      vmap[j] = {VarMap::split, 0.0, n_var, n_var + 1};
      n_var += 2;
    }
  }

  const int m = m0 + n_bound_rows;
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(m, n_var);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  std::vector<RowSense> sense(m);
  for (int i = 0; i < m0; ++i) {
    double r = lp.b(i);
    for (int j = 0; j < n0; ++j) {
      double aij = lp.a(i, j);
      if (aij == 0.0) continue;
      switch (vmap[j].kind) {
        case VarMap::shifted:
          rows(i, vmap[j].col) = aij;
          r -= aij * vmap[j].offset;
          break;
        case VarMap::mirrored:
          rows(i, vmap[j].col) = -aij;
          r -= aij * vmap[j].offset;
          break;
        case VarMap::split:
          rows(i, vmap[j].col) = aij;
          rows(i, vmap[j].neg_col) = -aij;
          break;
      }
    }
    rhs(i) = r;
    sense[i] = lp.senses[i];
  }
  {
    int i = m0;
    for (int j = 0; j < n0; ++j) {
      if (vmap[j].kind == VarMap::shifted && lp.upper(j) < kInf) {
        rows(i, vmap[j].col) = 1.0;
        rhs(i) = lp.upper(j) - lp.lower(j);
        sense[i] = RowSense::le;
        ++i;
      }
    }
  }

  // Normalize rhs >= 0; remember flips for dual recovery.
  std::vector<double> row_sign(m, 1.0);
  for (int i = 0; i < m; ++i) {
    if (rhs(i) < 0.0) {
      rows.row(i) *= -1.0;
      rhs(i) = -rhs(i);
      row_sign[i] = -1.0;
      if (sense[i] == RowSense::le)
        sense[i] = RowSense::ge;
      else if (sense[i] == RowSense::ge)
        sense[i] = RowSense::le;
    }
  }

  // Equality form: slack (+1) for <=, surplus (-1) for >=, then artificials
  // on every row that lacks a basic slack.
  int n_slack = 0;
  for (int i = 0; i < m; ++i)
    if (sense[i] != RowSense::eq) ++n_slack;
  int n_art = 0;
  for (int i = 0; i < m; ++i)
    if (sense[i] != RowSense::le) ++n_art;

  const int n_real = n_var + n_slack;
  const int n_total = n_real + n_art;
  Eigen::MatrixXd eq_a = Eigen::MatrixXd::Zero(m, n_total);
  eq_a.leftCols(n_var) = rows;
  std::vector<int> basis(m, -1);
  {
    int sc = n_var;
    int ac = n_real;
    for (int i = 0; i < m; ++i) {
      if (sense[i] == RowSense::le) {
        eq_a(i, sc) = 1.0;
        basis[i] = sc++;
      } else if (sense[i] == RowSense::ge) {
        eq_a(i, sc++) = -1.0;
        eq_a(i, ac) = 1.0;
        basis[i] = ac++;
      } else {
        eq_a(i, ac) = 1.0;
        basis[i] = ac++;
      }
    }
  }

  Eigen::VectorXd obj = Eigen::VectorXd::Zero(n_total);
  for (int j = 0; j < n0; ++j) {
    double cj = lp.c(j);
    switch (vmap[j].kind) {
      case VarMap::shifted:
        obj(vmap[j].col) = cj;
        break;
      case VarMap::mirrored:
        obj(vmap[j].col) = -cj;
        break;
      case VarMap::split:
        obj(vmap[j].col) = cj;
        obj(vmap[j].neg_col) = -cj;
        break;
    }
  }

  Eigen::MatrixXd pristine = eq_a.leftCols(n_real);
  Eigen::VectorXd pristine_rhs = rhs;

  Eigen::MatrixXd t(m, n_total + 1);
  t.leftCols(n_total) = eq_a;
  t.col(n_total) = rhs;

  Solution sol;
  sol.x = Eigen::VectorXd::Zero(n0);
  sol.status = SolveStatus::optimal;

  std::vector<int> orig_row(m);
  for (int i = 0; i < m; ++i) orig_row[i] = i;

  if (n_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_total);
    phase1.tail(n_art).setOnes();
    SolveStatus st = run_phase(t, basis, phase1, n_total, opts.max_iterations);
    if (st == SolveStatus::iteration_limit) {
      sol.status = st;
      return sol;
    }
    double art_sum = 0.0;
    for (int i = 0; i < static_cast<int>(basis.size()); ++i)
      if (basis[i] >= n_real) art_sum += t(i, t.cols() - 1);
    if (art_sum > opts.feasibility_tol * (1.0 + pristine_rhs.lpNorm<1>())) {
      sol.status = SolveStatus::infeasible;
      return sol;
    }
    // Pivot leftover (degenerate) artificials out; drop dependent rows.
    for (int i = static_cast<int>(basis.size()) - 1; i >= 0; --i) {
      if (basis[i] < n_real) continue;
      int col = -1;
      double mag = kPivotTol;
      for (int j = 0; j < n_real; ++j) {
        if (std::abs(t(i, j)) > mag) {
          mag = std::abs(t(i, j));
          col = j;
        }
      }
      if (col < 0) {
        drop_row(t, basis, orig_row, i);
      } else {
        Eigen::RowVectorXd dummy = Eigen::RowVectorXd::Zero(t.cols());
        pivot(t, dummy, basis, i, col);
      }
    }
  }

  SolveStatus st = run_phase(t, basis, obj, n_real, opts.max_iterations);
  if (st != SolveStatus::optimal) {
    sol.status = st;
    return sol;
  }

  const int mk = static_cast<int>(basis.size());
  Eigen::VectorXd xs = Eigen::VectorXd::Zero(n_real);
  for (int i = 0; i < mk; ++i) xs(basis[i]) = t(i, t.cols() - 1);

  for (int j = 0; j < n0; ++j) {
    switch (vmap[j].kind) {
      case VarMap::shifted:
        sol.x(j) = vmap[j].offset + xs(vmap[j].col);
        break;
      case VarMap::mirrored:
        sol.x(j) = vmap[j].offset - xs(vmap[j].col);
        break;
      case VarMap::split:
        sol.x(j) = xs(vmap[j].col) - xs(vmap[j].neg_col);
        break;
    }
  }
  sol.objective_value = lp.c.dot(sol.x);

  // Row duals from the clean basis matrix: solve B'y = c_B, then undo the
  // rhs-sign normalization per row.
  Eigen::MatrixXd bmat(mk, mk);
  Eigen::VectorXd cb(mk);
  for (int i = 0; i < mk; ++i) {
    for (int r = 0; r < mk; ++r) bmat(r, i) = pristine(orig_row[r], basis[i]);
    cb(i) = obj(basis[i]);
  }
  Eigen::VectorXd y =
      bmat.transpose().colPivHouseholderQr().solve(cb);
  Eigen::VectorXd y_full = Eigen::VectorXd::Zero(m);
  for (int r = 0; r < mk; ++r) y_full(orig_row[r]) = y(r);

  sol.dual_values = Eigen::VectorXd::Zero(m0);
  for (int i = 0; i < m0; ++i) {
    double v = -row_sign[i] * y_full(i);
    sol.dual_values(i) = (lp.senses[i] == RowSense::ge) ? -v : v;
  }
  return sol;
}

Solution lexicographic_solve(const StandardFormLP& lp,
                             const SolverOptions& opts) {
  validate_lp(lp);
  Solution base = simplex(lp, opts);
  if (base.status != SolveStatus::optimal) return base;

  const int n = static_cast<int>(lp.c.size());
  StandardFormLP work = lp;
  auto append_row = [&work](const Eigen::RowVectorXd& a, double b,
                            RowSense s) {
    const auto m = work.a.rows();
    work.a.conservativeResize(m + 1, Eigen::NoChange);
    work.a.row(m) = a;
    work.b.conservativeResize(m + 1);
    work.b(m) = b;
    work.senses.push_back(s);
  };

  double v = base.objective_value;
  append_row(lp.c.transpose(), v + 1e-11 * (1.0 + std::abs(v)), RowSense::le);

  Solution cur = base;
  for (int k = 0; k < n; ++k) {
    work.c = Eigen::VectorXd::Unit(n, k);
    cur = simplex(work, opts);
    if (cur.status != SolveStatus::optimal) return cur;
    double vk = cur.x(k);
    double eps = 1e-11 * (1.0 + std::abs(vk));
    Eigen::RowVectorXd ek = Eigen::RowVectorXd::Zero(n);
    ek(k) = 1.0;
    append_row(ek, vk + eps, RowSense::le);
    append_row(ek, vk - eps, RowSense::ge);
  }
  cur.objective_value = lp.c.dot(cur.x);
  cur.dual_values.resize(0);
  return cur;
}

namespace {

struct FlatRow {
  Eigen::RowVectorXd a;
  double b;
  bool eq;
};

std::vector<FlatRow> flatten_rows(const std::vector<Constraint>& constraints,
                                  int dim) {
  std::vector<FlatRow> rows;
  for (const auto& c : constraints) {
    if (!c.is_affine())
      throw std::invalid_argument(
          "constraints must be affine for this solver");
    if (c.dim() != dim)
      throw std::invalid_argument("constraint dimension mismatch");
    bool eq = c.kind() == ConstraintKind::affine_equality;
    for (Eigen::Index r = 0; r < c.a().rows(); ++r) {
      rows.push_back({c.a().row(r), c.b()(r), eq});
    }
  }
  return rows;
}

}  // namespace

Solution active_set_qp(const Eigen::MatrixXd& p, const Eigen::VectorXd& q,
                       const std::vector<Constraint>& constraints,
                       const SolverOptions& opts) {
  const int n = static_cast<int>(q.size());
  if (p.rows() != n || p.cols() != n)
    throw std::invalid_argument("quadratic term must be n x n");
  auto rows = flatten_rows(constraints, n);
  const int m = static_cast<int>(rows.size());

  Solution sol;
  sol.x = Eigen::VectorXd::Zero(n);

  Eigen::VectorXd x;
  const double ftol = opts.feasibility_tol;
  auto feasible = [&](const Eigen::VectorXd& v) {
    for (const auto& r : rows) {
      double res = r.a.dot(v) - r.b;
      if (r.eq ? std::abs(res) > ftol : res > ftol) return false;
    }
    return true;
  };

  if (opts.initial_point && opts.initial_point->size() == n &&
      feasible(*opts.initial_point)) {
    x = *opts.initial_point;
  } else if (m == 0) {
    x = Eigen::VectorXd::Zero(n);
  } else {
    Eigen::MatrixXd a(m, n);
    Eigen::VectorXd b(m);
    std::vector<RowSense> senses(m);
    for (int i = 0; i < m; ++i) {
      a.row(i) = rows[i].a;
      b(i) = rows[i].b;
      senses[i] = rows[i].eq ? RowSense::eq : RowSense::le;
    }
    Solution ph = simplex(StandardFormLP::with_free_bounds(
                              Eigen::VectorXd::Zero(n), a, b, senses),
                          opts);
    if (ph.status != SolveStatus::optimal) {
      sol.status = SolveStatus::infeasible;
      return sol;
    }
    x = ph.x;
  }

  // Tiny diagonal regularization keeps the equality-constrained steps
  // bounded when p is singular; it is far below the solve tolerances.
  double reg = 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff());
  Eigen::MatrixXd pr = p + reg * Eigen::MatrixXd::Identity(n, n);

  std::vector<char> active(m, 0);
  for (int i = 0; i < m; ++i) {
    if (rows[i].eq || std::abs(rows[i].a.dot(x) - rows[i].b) <= ftol)
      active[i] = 1;
  }

  Eigen::VectorXd lam_full = Eigen::VectorXd::Zero(m);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    std::vector<int> w;
    for (int i = 0; i < m; ++i)
      if (active[i]) w.push_back(i);
    const int k = static_cast<int>(w.size());

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = pr;
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -(p * x + q);
    for (int i = 0; i < k; ++i) {
      kkt.block(n + i, 0, 1, n) = rows[w[i]].a;
      kkt.block(0, n + i, n, 1) = rows[w[i]].a.transpose();
      rhs(n + i) = rows[w[i]].b - rows[w[i]].a.dot(x);
    }
    Eigen::VectorXd step =
        kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd dir = step.head(n);

    if (dir.norm() <= 1e-10 * (1.0 + x.norm())) {
      lam_full.setZero();
      for (int i = 0; i < k; ++i) lam_full(w[i]) = step(n + i);
      int drop = -1;
      for (int i = 0; i < m; ++i) {
        if (active[i] && !rows[i].eq && lam_full(i) < -1e-9) {
          drop = i;
          break;
        }
      }
      if (drop < 0) {
        sol.x = x;
        sol.objective_value = 0.5 * x.dot(p * x) + q.dot(x);
        sol.dual_values = lam_full;
        sol.status = SolveStatus::optimal;
        return sol;
      }
      active[drop] = 0;
      continue;
    }

    double alpha = 1.0;
    int blocker = -1;
    for (int i = 0; i < m; ++i) {
      if (active[i]) continue;
      double d = rows[i].a.dot(dir);
      if (d > 1e-12) {
        double room = (rows[i].b - rows[i].a.dot(x)) / d;
        if (room < alpha) {
          alpha = std::max(room, 0.0);
          blocker = i;
        }
      }
    }
    x += alpha * dir;
    if (blocker >= 0) active[blocker] = 1;
  }
  sol.x = x;
  sol.objective_value = 0.5 * x.dot(p * x) + q.dot(x);
  sol.status = SolveStatus::iteration_limit;
  return sol;
}

Eigen::VectorXd project(const std::vector<Constraint>& constraints,
                        const Eigen::VectorXd& x) {
  if (constraints.empty()) return x;
  if (auto box = detect_box(constraints, static_cast<int>(x.size()))) {
    return x.cwiseMax(box->first).cwiseMin(box->second);
  }
  const int n = static_cast<int>(x.size());
  SolverOptions opts;
  Solution s = active_set_qp(Eigen::MatrixXd::Identity(n, n), -x,
                             constraints, opts);
  if (s.status != SolveStatus::optimal)
    throw std::runtime_error(std::string("projection failed: ") +
                             to_string(s.status));
  return s.x;
}

Solution projected_gradient(const Expression& f,
                            const std::vector<Constraint>& constraints,
                            const SolverOptions& opts) {
  int dim = f.input_dim();
  if (dim < 0) {
    for (const auto& c : constraints) dim = std::max(dim, c.dim());
  }
  if (dim < 1)
    throw std::invalid_argument("cannot infer problem dimension");
  if (f.output_dim() != 1)
    throw std::invalid_argument("objective must be scalar");

  Eigen::VectorXd x = opts.initial_point && opts.initial_point->size() == dim
                          ? *opts.initial_point
                          : Eigen::VectorXd::Zero(dim);
  x = project(constraints, x);
  double fx = f.evaluate_scalar(x);

  Solution sol;
  // The accepted step carries over between iterations (doubled once as the
  // next trial) so the backtracking cost stays constant per iteration.
  double eta = 1.0;
  int no_progress = 0;
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Eigen::VectorXd g = f.subgradient(x);
    Eigen::VectorXd mapped = project(constraints, x - g);
    if ((x - mapped).norm() <= opts.optimality_tol) {
      sol.x = x;
      sol.objective_value = fx;
      sol.status = SolveStatus::optimal;
      return sol;
    }
    eta = std::min(eta * 2.0, 1e12);
    Eigen::VectorXd xn;
    double fn = fx;
    while (true) {
      xn = project(constraints, x - eta * g);
      fn = f.evaluate_scalar(xn);
      if (fn <= fx + 1e-4 * g.dot(xn - x)) break;
      eta *= 0.5;
      if (eta < 1e-18) {
        // For a differentiable objective some step in (0, 1/L] always passes
        // the sufficient-decrease test in exact arithmetic, so running out of
        // step sizes means the decrease underflows against |fx|: the iterate
        // is optimal at working precision even if the residual still sits
        // above an aggressively small tolerance.
        sol.x = x;
        sol.objective_value = fx;
        sol.status = SolveStatus::optimal;
        return sol;
      }
    }
    // Accepted decreases below machine resolution of the objective cannot
    // compound into further progress; after a few such rounds the iterate is
    // optimal at working precision regardless of the requested tolerance.
    double floor = 10.0 * std::numeric_limits<double>::epsilon() *
                   std::max({std::abs(fx), std::abs(fn), 1.0});
    no_progress = fx - fn <= floor ? no_progress + 1 : 0;
    x = xn;
    fx = fn;
    if (no_progress >= 3) {
      sol.x = x;
      sol.objective_value = fx;
      sol.status = SolveStatus::optimal;
      return sol;
    }
  }
  sol.x = x;
  sol.objective_value = fx;
  sol.status = SolveStatus::iteration_limit;
  return sol;
}

}  // namespace dopt
