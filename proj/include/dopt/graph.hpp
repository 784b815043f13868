#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dopt {

// Directed communication topology. An edge (j, i) means j -> i: agent j's
// messages flow to agent i, so j is an in-neighbor of i. Self-loops are not
// stored; self-influence lives only on the weight matrix diagonal.
class Graph {
 public:
  static Graph from_edge_list(int n,
                              const std::vector<std::pair<int, int>>& edges);
  // Erdos-Renyi topology, redrawn with a fresh derived seed until strongly
  // connected; deterministic in (n, p, seed).
  static Graph random_binomial(int n, double p, std::uint64_t seed,
                               bool undirected);

  int size() const { return n_; }
  const std::vector<int>& in_neighbors(int i) const { return in_[i]; }
  const std::vector<int>& out_neighbors(int i) const { return out_[i]; }
  bool has_edge(int from, int to) const;
  bool is_undirected() const;

  std::vector<std::pair<int, int>> edge_list() const;

  // Longest shortest directed path between any ordered pair.
  int diameter() const;

  // One "from to" pair per line.
  std::string to_edge_list_text() const;
  static Graph from_edge_list_text(const std::string& text);

 private:
  Graph(int n) : n_(n), in_(n), out_(n) {}
  int n_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
};

bool is_strongly_connected(const Graph& g);

// Consensus weights. Metropolis-Hastings weights require an undirected
// graph and come out symmetric doubly stochastic; uniform row weights
// (1 / (1 + indegree)) work on any graph but are only row-stochastic.
Eigen::MatrixXd metropolis_weights(const Graph& g);
Eigen::MatrixXd uniform_row_weights(const Graph& g);

std::string weight_matrix_csv(const Eigen::MatrixXd& w);

}  // namespace dopt
