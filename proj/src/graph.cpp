#include "dopt/graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dopt/rng.hpp"

namespace dopt {

Graph Graph::from_edge_list(int n,
                            const std::vector<std::pair<int, int>>& edges) {
  if (n < 1) throw std::invalid_argument("graph needs at least one agent");
  Graph g(n);
  std::set<std::pair<int, int>> seen;
  for (auto [from, to] : edges) {
    if (from < 0 || from >= n || to < 0 || to >= n)
      throw std::invalid_argument("edge index out of range: " +
                                  std::to_string(from) + "->" +
                                  std::to_string(to));
    if (from == to)
      throw std::invalid_argument("self-loop rejected: " +
                                  std::to_string(from));
    if (!seen.insert({from, to}).second)
      throw std::invalid_argument("duplicate edge: " + std::to_string(from) +
                                  "->" + std::to_string(to));
    g.out_[from].push_back(to);
    g.in_[to].push_back(from);
  }
  for (auto& v : g.in_) std::sort(v.begin(), v.end());
  for (auto& v : g.out_) std::sort(v.begin(), v.end());
  return g;
}

Graph Graph::random_binomial(int n, double p, std::uint64_t seed,
                             bool undirected) {
  if (p <= 0.0 || p > 1.0) {
    if (n == 1 && p == 0.0) return from_edge_list(1, {});
    throw std::invalid_argument("edge probability must be in (0, 1]");
  }
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(seed, attempt);
    std::vector<std::pair<int, int>> edges;
    if (undirected) {
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.uniform() < p) {
            edges.emplace_back(i, j);
            edges.emplace_back(j, i);
          }
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j && rng.uniform() < p) edges.emplace_back(i, j);
    }
    Graph g = from_edge_list(n, edges);
    if (is_strongly_connected(g)) return g;
    if (attempt > 100000)
      throw std::runtime_error("could not draw a strongly connected graph");
  }
}

bool Graph::has_edge(int from, int to) const {
  const auto& o = out_[from];
  return std::binary_search(o.begin(), o.end(), to);
}

bool Graph::is_undirected() const {
  for (int i = 0; i < n_; ++i)
    for (int j : out_[i])
      if (!has_edge(j, i)) return false;
  return true;
}

std::vector<std::pair<int, int>> Graph::edge_list() const {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n_; ++i)
    for (int j : out_[i]) edges.emplace_back(i, j);
  return edges;
}

namespace {
// Breadth-first distances along directed edges; -1 for unreachable.
std::vector<int> bfs_distances(const Graph& g, int source) {
  std::vector<int> dist(g.size(), -1);
  std::deque<int> q{source};
  dist[source] = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop_front();
    for (int v : g.out_neighbors(u))
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}
}  // namespace

int Graph::diameter() const {
  int d = 0;
  for (int i = 0; i < n_; ++i) {
    auto dist = bfs_distances(*this, i);
    for (int x : dist) {
      if (x < 0) throw std::runtime_error("diameter of a disconnected graph");
      d = std::max(d, x);
    }
  }
  return d;
}

std::string Graph::to_edge_list_text() const {
  std::ostringstream os;
  for (auto [from, to] : edge_list()) os << from << ' ' << to << '\n';
  return os.str();
}

Graph Graph::from_edge_list_text(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::pair<int, int>> edges;
  int from, to, n = 0;
  while (is >> from >> to) {
    edges.emplace_back(from, to);
    n = std::max({n, from + 1, to + 1});
  }
  return from_edge_list(n, edges);
}

bool is_strongly_connected(const Graph& g) {
  for (int i = 0; i < g.size(); ++i) {
    auto dist = bfs_distances(g, i);
    if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; }))
      return false;
  }
  return true;
}

Eigen::MatrixXd metropolis_weights(const Graph& g) {
  if (!g.is_undirected())
    throw std::invalid_argument(
        "metropolis weights need an undirected graph (doubly stochastic "
        "otherwise not guaranteed)");
  const int n = g.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : g.in_neighbors(i)) {
      const double deg_i = static_cast<double>(g.in_neighbors(i).size());
      const double deg_j = static_cast<double>(g.in_neighbors(j).size());
      w(i, j) = 1.0 / (1.0 + std::max(deg_i, deg_j));
      off += w(i, j);
    }
    w(i, i) = 1.0 - off;
  }
  return w;
}

Eigen::MatrixXd uniform_row_weights(const Graph& g) {
  const int n = g.size();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double a = 1.0 / (1.0 + static_cast<double>(g.in_neighbors(i).size()));
    for (int j : g.in_neighbors(i)) w(i, j) = a;
    w(i, i) = a;
  }
  return w;
}

std::string weight_matrix_csv(const Eigen::MatrixXd& w) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (j) os << ',';
      os << w(i, j);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace dopt
