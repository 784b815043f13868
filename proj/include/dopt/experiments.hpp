#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dopt/problem.hpp"

namespace dopt {

// Two-dimensional two-class Gaussian sample held by one agent. Class +1 is
// centered at (0,0) and class -1 at (3,2); labels are equiprobable and each
// agent draws between 4 and 10 points from its own rng stream.
struct ClassificationData {
  Eigen::MatrixXd points;  // m_i x 2
  Eigen::VectorXd labels;  // entries +-1
  double c_reg = 10.0;     // shared regularization weight
};

std::vector<ClassificationData> gen_classification(int n, uint64_t seed,
                                                   double c_reg = 10.0);

// Same clusters with covariance shrunk to 0.2*I, redrawn until a
// feasibility solve certifies linear separability (hard-margin assumption).
std::vector<ClassificationData> gen_svm(int n, uint64_t seed);

// Regularized logistic loss over (w, b) in R^3: the sum of the agent's
// point losses plus C/(2N)*||w||^2, so the locals sum to the centralized
// objective with C/2*||w||^2.
Expression local_logistic_objective(const ClassificationData& data, int n);

// Hard-margin rows l_j (w'p_j + b) >= 1 over (w, b).
std::vector<Constraint> svm_constraints(const ClassificationData& data);

// Shared-objective local piece for the separating-hyperplane problem:
// minimize 0.5*||w||^2 subject to the agent's own margin rows.
CommonCostLocal local_svm_problem(const ClassificationData& data);

// Worst margin violation of (w, b) over every agent's points:
// 1 - min_{k,j} l_{k,j} (w'p_{k,j} + b).
double svm_violation(const std::vector<ClassificationData>& all,
                     const Eigen::VectorXd& wb);

// One agent's piece of the power-profile problem: scalar dynamics
// x(k+1) = a x(k) + b u(k) from x(0) = x0, box-bounded inputs, linear
// stage costs, and a shared per-stage network budget.
struct MicrogridData {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;
  double d = 1.0;
  double x0 = 0.0;
  double u_min = -2.0;
  double u_max = 1.0;
  double stage_cost = -1.0;  // cost per unit input each stage
  Eigen::VectorXd budget;    // h, one entry per stage (network-wide)
};

struct MicrogridParams {
  double a_min = 0.8;
  double a_max = 1.0;
  double u_min = -2.0;
  double u_max = 1.0;
  double cost_min = 1.0;  // stage_cost = -c_i with c_i in [cost_min, cost_max]
  double cost_max = 2.0;
  double budget_fraction = 0.75;  // h_k = budget_fraction * N
};

std::vector<MicrogridData> gen_microgrid(int n, int s, uint64_t seed,
                                         const MicrogridParams& params = {});

// Decision vector stacks (x(1..S), u(0..S-1)); dynamics enter as affine
// equalities and the coupling rows are g_k = c*x(k) + d*u(k) - h_k/N with
// x(0) folded in as a constant.
ConstraintCoupledLocal local_microgrid_problem(const MicrogridData& data,
                                               int n);

struct OracleResult {
  Eigen::VectorXd x;
  double objective = 0.0;
};

// Centralized solves of the pooled problems, used as the reference for all
// error metrics.
OracleResult centralized_logistic(const std::vector<ClassificationData>& data);
OracleResult centralized_svm(const std::vector<ClassificationData>& data);
// x holds the agents' blocks in id order, 2S entries each.
OracleResult centralized_microgrid(const std::vector<MicrogridData>& data);

// Instance archives (named-tensor binary files).
void write_classification_instance(const std::string& path,
                                   const std::vector<ClassificationData>& data);
std::vector<ClassificationData> read_classification_instance(
    const std::string& path);
void write_microgrid_instance(const std::string& path,
                              const std::vector<MicrogridData>& data);
std::vector<MicrogridData> read_microgrid_instance(const std::string& path);

}  // namespace dopt
