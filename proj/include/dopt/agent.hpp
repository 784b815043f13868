#pragma once

#include <map>
#include <memory>
#include <variant>
#include <vector>

#include "dopt/comms.hpp"
#include "dopt/problem.hpp"
#include "dopt/rng.hpp"

namespace dopt {

using LocalData = std::variant<std::monostate, CostCoupledLocal,
                               CommonCostLocal, ConstraintCoupledLocal>;

// Execution context of one computing unit: identity, neighborhood, weight
// row, local problem data, a communicator, and a private rng stream derived
// from (global_seed, id).
class Agent {
 public:
  Agent(int id, std::vector<int> in_neighbors, std::vector<int> out_neighbors,
        std::map<int, double> weights, LocalData local_data,
        std::shared_ptr<Transport> transport, uint64_t global_seed);

  int id() const { return id_; }
  const std::vector<int>& in_neighbors() const { return in_neighbors_; }
  const std::vector<int>& out_neighbors() const { return out_neighbors_; }

  // a_ij for j == id() or j an in-neighbor; the row sums to one.
  double weight(int j) const;

  const LocalData& local_data() const { return local_data_; }
  void set_problem(LocalData data);

  template <typename T>
  const T& local() const {
    const T* p = std::get_if<T>(&local_data_);
    if (!p)
      throw std::logic_error("agent holds a different local data kind");
    return *p;
  }

  Rng& rng() { return rng_; }
  uint64_t round() const { return round_; }

  // Collectives; each call consumes one round tick.
  std::map<int, std::vector<Tensor>> neighbors_exchange(
      const std::vector<Tensor>& payload, MessageKind kind);
  std::map<int, std::vector<Tensor>> neighbors_exchange_keyed(
      const std::map<int, std::vector<Tensor>>& payloads, MessageKind kind);
  void barrier();

 private:
  int id_;
  std::vector<int> in_neighbors_;
  std::vector<int> out_neighbors_;
  std::map<int, double> weights_;
  LocalData local_data_;
  Communicator comms_;
  Rng rng_;
  uint64_t round_ = 0;
};

void validate_local_data(const LocalData& data);

}  // namespace dopt
