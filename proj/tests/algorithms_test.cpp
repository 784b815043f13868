#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <thread>
#include <vector>

#include "doctest.h"
#include "dopt/algorithms.hpp"
#include "dopt/graph.hpp"
#include "dopt/transport.hpp"
#include "test_util.hpp"

using dopt::Agent;
using dopt::Algorithm;
using dopt::CommonCostLocal;
using dopt::Constraint;
using dopt::ConstraintCoupledLocal;
using dopt::CostCoupledLocal;
using dopt::Expression;
using dopt::Graph;
using dopt::History;
using dopt::InProcHub;
using dopt::LocalData;
using dopt::StepSize;

namespace {

Graph complete_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) edges.emplace_back(i, j);
  return Graph::from_edge_list(n, edges);
}

Graph directed_ring(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
  return Graph::from_edge_list(n, edges);
}

std::vector<History> run_network(
    const Graph& g, const std::vector<LocalData>& locals,
    const std::function<std::unique_ptr<Algorithm>(int)>& make, uint64_t iters,
    const StepSize& step, const Eigen::MatrixXd* weights = nullptr) {
  int n = g.size();
  InProcHub hub(n, std::chrono::seconds(120));
  std::vector<History> out(static_cast<size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
  std::vector<std::thread> threads;
  for (int i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      try {
        std::map<int, double> row;
        if (weights) {
          row[i] = (*weights)(i, i);
          for (int j : g.in_neighbors(i)) row[j] = (*weights)(i, j);
        }
        Agent agent(i, g.in_neighbors(i), g.out_neighbors(i), row,
                    locals[static_cast<size_t>(i)], hub.transport(i), 11);
        auto alg = make(i);
        out[static_cast<size_t>(i)] = dopt::run(*alg, agent, iters, step);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// 0.5 p (x - a)^2 as a quadratic form in one variable
Expression scalar_quadratic(double p, double a) {
  Eigen::MatrixXd pm(1, 1);
  pm << p;
  Eigen::VectorXd q(1);
  q << -p * a;
  return Expression::quadratic_form(pm, q, 0.5 * p * a * a);
}

Agent solo_agent(InProcHub& hub, LocalData data) {
  return Agent(0, {}, {}, {{0, 1.0}}, std::move(data), hub.transport(0), 3);
}

// The packed basis is [row count | rows...] padded with NaN up to a fixed
// capacity of (dim+2)^2 entries; only the populated prefix is comparable.
Eigen::VectorXd basis_prefix(const Eigen::VectorXd& aux) {
  int width = static_cast<int>(std::lround(std::sqrt(double(aux.size() - 1))));
  REQUIRE(1 + width * width == aux.size());
  int count = static_cast<int>(aux(0));
  return aux.head(1 + count * width);
}

}  // namespace

TEST_CASE("step size rules evaluate and validate") {
  StepSize c = StepSize::constant(0.5);
  CHECK(c.at(1) == 0.5);
  CHECK(c.at(1000) == 0.5);
  CHECK_THROWS_AS(StepSize::constant(0.0), std::invalid_argument);
  CHECK_THROWS_AS(StepSize::constant(-1.0), std::invalid_argument);

  StepSize d = StepSize::diminishing(0.6);
  CHECK(d.at(1) == 1.0);
  CHECK(d.at(2) == doctest::Approx(std::pow(0.5, 0.6)));
  CHECK(d.at(10) == doctest::Approx(std::pow(0.1, 0.6)));
  CHECK_NOTHROW(StepSize::diminishing(1.0));
  CHECK_THROWS_AS(StepSize::diminishing(0.5), std::invalid_argument);
  CHECK_THROWS_AS(StepSize::diminishing(1.01), std::invalid_argument);
  CHECK_THROWS_AS(d.at(0), std::invalid_argument);
}

TEST_CASE("solo subgradient descent contracts to the minimizer") {
  InProcHub hub(1);
  CostCoupledLocal data{scalar_quadratic(2.0, 3.0), {}};
  Agent agent = solo_agent(hub, data);
  dopt::SubgradientMethod alg;
  History h = dopt::run(alg, agent, 200, StepSize::constant(0.25));
  REQUIRE(h.size() == 201);
  for (size_t r = 0; r < h.size(); ++r)
    CHECK(h[r].round == r);  // rounds are contiguous from zero
  CHECK(std::abs(h.back().x(0) - 3.0) <= 1e-10);
  CHECK(h.back().local_cost <= 1e-12);
  CHECK(h.front().x(0) == 0.0);
  CHECK(h.back().auxiliary.size() == 0);
}

TEST_CASE("subgradient projection keeps iterates in the local set") {
  InProcHub hub(1);
  CostCoupledLocal data{scalar_quadratic(2.0, 3.0),
                        {Constraint::box(Eigen::VectorXd::Constant(1, -1.0),
                                         Eigen::VectorXd::Ones(1))}};
  Agent agent = solo_agent(hub, data);
  dopt::SubgradientMethod alg;
  History h = dopt::run(alg, agent, 300, StepSize::constant(0.25));
  for (const auto& rec : h) CHECK(rec.x(0) <= 1.0 + 1e-12);
  CHECK(h.back().x(0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("subgradient with zero cost performs plain consensus") {
  int n = 3;
  Graph g = complete_graph(n);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  std::vector<LocalData> locals;
  for (int i = 0; i < n; ++i)
    locals.push_back(CostCoupledLocal{
        Expression::affine_row(Eigen::VectorXd::Zero(n), 0.0), {}});
  auto make = [&](int i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    return std::make_unique<dopt::SubgradientMethod>(e);
  };
  auto hs = run_network(g, locals, make, 60, StepSize::constant(0.1), &w);
  Eigen::VectorXd mean = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (const auto& h : hs)
    CHECK((h.back().x - mean).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("networked subgradient approaches the aggregate minimizer") {
  int n = 3;
  Graph g = complete_graph(n);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  std::vector<LocalData> locals;
  for (int i = 0; i < n; ++i)  // minimizers 1, 2, 3
    locals.push_back(
        CostCoupledLocal{scalar_quadratic(2.0, double(i + 1)), {}});
  auto make = [](int) { return std::make_unique<dopt::SubgradientMethod>(); };
  auto hs =
      run_network(g, locals, make, 3000, StepSize::diminishing(0.7), &w);
  for (const auto& h : hs) CHECK(std::abs(h.back().x(0) - 2.0) <= 0.02);
}

TEST_CASE("solo gradient tracking reproduces plain gradient descent") {
  InProcHub hub(1);
  CostCoupledLocal data{scalar_quadratic(2.0, 3.0), {}};
  Agent agent = solo_agent(hub, data);
  dopt::GradientTracking alg;
  History h = dopt::run(alg, agent, 50, StepSize::constant(0.1));
  double x = 0.0;
  for (size_t r = 0; r < h.size(); ++r) {
    CHECK(std::abs(h[r].x(0) - x) <= 1e-12);
    x -= 0.1 * 2.0 * (x - 3.0);
  }
}

TEST_CASE("gradient trackers sum to the instantaneous gradient sum") {
  int n = 3;
  int d = 2;
  Graph g = complete_graph(n);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  std::vector<LocalData> locals;
  std::vector<Expression> costs;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d) * double(i + 1);
    p(0, 1) = p(1, 0) = 0.2;
    Eigen::VectorXd q(d);
    q << -double(i), 0.5 * i;
    costs.push_back(Expression::quadratic_form(p, q, 0.0));
    locals.push_back(CostCoupledLocal{costs.back(), {}});
  }
  auto make = [](int) { return std::make_unique<dopt::GradientTracking>(); };
  auto hs = run_network(g, locals, make, 80, StepSize::constant(0.05), &w);
  for (size_t r = 0; r < hs[0].size(); ++r) {
    Eigen::VectorXd tracker_sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
      tracker_sum += hs[static_cast<size_t>(i)][r].auxiliary;
      grad_sum += costs[static_cast<size_t>(i)].subgradient(
          hs[static_cast<size_t>(i)][r].x);
    }
    CHECK((tracker_sum - grad_sum).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("gradient tracking reaches exact consensus on the optimum") {
  int n = 3;
  Graph g = complete_graph(n);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  std::vector<LocalData> locals;
  for (int i = 0; i < n; ++i)
    locals.push_back(
        CostCoupledLocal{scalar_quadratic(2.0, double(i + 1)), {}});
  auto make = [](int) { return std::make_unique<dopt::GradientTracking>(); };
  auto hs = run_network(g, locals, make, 2000, StepSize::constant(0.05), &w);
  for (const auto& h : hs) CHECK(std::abs(h.back().x(0) - 2.0) <= 1e-9);
}

TEST_CASE("gradient tracking rejects unsupported configurations") {
  InProcHub hub(1);
  CostCoupledLocal data{scalar_quadratic(1.0, 0.0), {}};

  Agent a1 = solo_agent(hub, data);
  dopt::GradientTracking alg;
  CHECK_THROWS_AS(alg.init(a1, StepSize::diminishing(0.8)),
                  std::invalid_argument);

  CostCoupledLocal constrained = data;
  constrained.local_set = {Constraint::box(Eigen::VectorXd::Zero(1),
                                           Eigen::VectorXd::Ones(1))};
  Agent a2 = solo_agent(hub, constrained);
  dopt::GradientTracking alg2;
  CHECK_THROWS_AS(alg2.init(a2, StepSize::constant(0.1)),
                  std::invalid_argument);

  CommonCostLocal wrong{scalar_quadratic(1.0, 0.0), {}};
  Agent a3 = solo_agent(hub, wrong);
  dopt::GradientTracking alg3;
  CHECK_THROWS_AS(alg3.init(a3, StepSize::constant(0.1)),
                  std::invalid_argument);
}

TEST_CASE("solo constraints consensus settles immediately") {
  InProcHub hub(1);
  Eigen::VectorXd c(1);
  c << -1.0;
  CommonCostLocal data{
      Expression::affine_row(c, 0.0),
      {Constraint::row_le(Eigen::VectorXd::Ones(1), 2.0)}};
  Agent agent = solo_agent(hub, data);
  dopt::ConstraintsConsensus alg;
  History h = dopt::run(alg, agent, 3, StepSize::constant(1.0));
  for (const auto& rec : h) CHECK(rec.x(0) == doctest::Approx(2.0));
  CHECK(exact_eq(basis_prefix(h.back().auxiliary),
                 basis_prefix(h.front().auxiliary)));
  CHECK(h.back().auxiliary(0) == 1.0);  // one basis row
}

TEST_CASE("constraints consensus floods the binding row around a ring") {
  int n = 4;
  Graph g = directed_ring(n);
  int diam = g.diameter();
  REQUIRE(diam == n - 1);
  Eigen::VectorXd c(1);
  c << -1.0;  // maximize x
  std::vector<LocalData> locals;
  for (int i = 0; i < n; ++i)
    locals.push_back(CommonCostLocal{
        Expression::affine_row(c, 0.0),
        {Constraint::row_le(Eigen::VectorXd::Ones(1), double(i + 1))}});
  auto make = [](int) {
    return std::make_unique<dopt::ConstraintsConsensus>();
  };
  uint64_t budget = 2 * static_cast<uint64_t>(diam) + 2;
  auto hs = run_network(g, locals, make, budget, StepSize::constant(1.0));
  for (const auto& h : hs) {
    CHECK(std::abs(h.back().x(0) - 1.0) <= 1e-9);
    // basis identical across agents once agreed
    CHECK(exact_eq(basis_prefix(h.back().auxiliary),
                   basis_prefix(hs[0].back().auxiliary)));
  }
  // and stable: the last two records of every agent coincide
  for (const auto& h : hs)
    CHECK(exact_eq(basis_prefix(h[h.size() - 2].auxiliary),
                   basis_prefix(h.back().auxiliary)));
}

TEST_CASE("constraints consensus agrees on a quadratic common cost") {
  int n = 3;
  Graph g = complete_graph(n);
  std::vector<LocalData> locals;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd row(2);
    row << 1.0, 0.0;
    // bounds 1, 2, 1: the binding one sits at agent 1
    double bound = 2.0 - std::abs(i - 1);
    locals.push_back(CommonCostLocal{
        Expression::quadratic_form(Eigen::MatrixXd::Identity(2, 2),
                                   Eigen::VectorXd::Zero(2), 0.0),
        {Constraint::row_ge(row, bound)}});
  }
  auto make = [](int) {
    return std::make_unique<dopt::ConstraintsConsensus>();
  };
  auto hs = run_network(g, locals, make, 4, StepSize::constant(1.0));
  for (const auto& h : hs) {
    CHECK(h.back().x(0) == doctest::Approx(2.0));
    CHECK(std::abs(h.back().x(1)) <= 1e-9);
  }
}

namespace {

// two agents, one coupling row: min -2 u0 - u1 over the unit boxes subject
// to u0 + u1 <= 1, written per agent as g_i(u) = u - 1/2. The optimum is
// u = (1, 0) with value -2 and multiplier in [1, 2].
std::vector<LocalData> coupled_toy(double c0 = -2.0, double c1 = -1.0) {
  std::vector<LocalData> locals;
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd c(1);
    c << (i == 0 ? c0 : c1);
    Eigen::MatrixXd gm(1, 1);
    gm << 1.0;
    Eigen::VectorXd go(1);
    go << -0.5;
    locals.push_back(ConstraintCoupledLocal{
        Expression::affine_row(c, 0.0),
        {Constraint::box(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1))},
        Expression::affine(gm, go)});
  }
  return locals;
}

}  // namespace

TEST_CASE("dual decomposition prices the coupled toy to its optimum") {
  Graph g = complete_graph(2);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  auto make = [](int) { return std::make_unique<dopt::DualSubgradient>(); };
  auto hs = run_network(g, coupled_toy(), make, 2000,
                        StepSize::diminishing(0.6), &w);

  for (const auto& h : hs)
    for (const auto& rec : h) {
      REQUIRE(rec.auxiliary.size() == 2);  // multiplier then raw iterate
      CHECK(rec.auxiliary(0) >= 0.0);      // dual feasibility, every round
    }

  double cost = hs[0].back().local_cost + hs[1].back().local_cost;
  CHECK(std::abs(cost - (-2.0)) <= 0.05);
  double coupling =
      (hs[0].back().x(0) - 0.5) + (hs[1].back().x(0) - 0.5);
  CHECK(coupling <= 0.05);
  CHECK(std::abs(hs[0].back().auxiliary(0) - hs[1].back().auxiliary(0)) <=
        0.2);

  // the reported iterate is the running average of the raw local solves
  for (const auto& h : hs) {
    double sum = 0.0;
    for (size_t t = 1; t < h.size(); ++t) {
      sum += h[t].auxiliary(1);
      CHECK(std::abs(h[t].x(0) - sum / double(t)) <= 1e-12);
    }
  }
}

TEST_CASE("dual decomposition requires coupled data and an affine map") {
  InProcHub hub(1);
  CostCoupledLocal wrong{scalar_quadratic(1.0, 0.0), {}};
  Agent a = solo_agent(hub, wrong);
  dopt::DualSubgradient alg;
  CHECK_THROWS_AS(alg.init(a, StepSize::diminishing(0.6)),
                  std::invalid_argument);
}

TEST_CASE("allocation decomposition keeps the toy feasible every round") {
  Graph g = complete_graph(2);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  auto make = [](int) {
    return std::make_unique<dopt::PrimalDecomposition>();
  };
  auto hs = run_network(g, coupled_toy(), make, 2000,
                        StepSize::diminishing(0.6), &w);

  double initial_alloc_sum =
      hs[0].front().auxiliary(1) + hs[1].front().auxiliary(1);
  for (size_t t = 0; t < hs[0].size(); ++t) {
    double coupling = (hs[0][t].x(0) - 0.5) + (hs[1][t].x(0) - 0.5);
    CHECK(coupling <= 1e-9);
    double alloc_sum = hs[0][t].auxiliary(1) + hs[1][t].auxiliary(1);
    CHECK(std::abs(alloc_sum - initial_alloc_sum) <= 1e-10);
    CHECK(hs[0][t].auxiliary(0) >= -1e-12);  // prices stay nonnegative
  }
  double cost = hs[0].back().local_cost + hs[1].back().local_cost;
  CHECK(std::abs(cost - (-2.0)) <= 0.1);
}

TEST_CASE("allocation decomposition is stationary on a symmetric network") {
  Graph g = complete_graph(2);
  Eigen::MatrixXd w = dopt::metropolis_weights(g);
  auto make = [](int) {
    return std::make_unique<dopt::PrimalDecomposition>();
  };
  auto hs = run_network(g, coupled_toy(-1.0, -1.0), make, 20,
                        StepSize::diminishing(0.6), &w);
  for (const auto& h : hs)
    for (const auto& rec : h) CHECK(rec.auxiliary(1) == 0.0);
}

TEST_CASE("allocation decomposition requires an undirected graph") {
  Graph g = directed_ring(3);
  InProcHub hub(3);
  auto toy = coupled_toy();
  Agent agent(0, g.in_neighbors(0), g.out_neighbors(0),
              {{0, 0.5}, {2, 0.5}}, toy[0], hub.transport(0), 1);
  dopt::PrimalDecomposition alg;
  CHECK_THROWS_AS(alg.init(agent, StepSize::diminishing(0.6)),
                  std::invalid_argument);
  CHECK_THROWS_AS(dopt::PrimalDecomposition(-1.0), std::invalid_argument);
}

TEST_CASE("result accessor requires initialization") {
  dopt::SubgradientMethod alg;
  CHECK_THROWS_AS(alg.result(), std::logic_error);
}
