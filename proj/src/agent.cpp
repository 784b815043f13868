#include "dopt/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dopt {

namespace {

int data_dim(const Expression& e, const std::vector<Constraint>& cons) {
  int d = e.input_dim();
  for (const auto& c : cons) {
    if (d < 0)
      d = c.dim();
    else if (c.dim() != d)
      throw std::invalid_argument("local data dimensions disagree");
  }
  return d;
}

}  // namespace

void validate_local_data(const LocalData& data) {
  if (std::holds_alternative<std::monostate>(data)) return;
  if (const auto* cc = std::get_if<CostCoupledLocal>(&data)) {
    data_dim(cc->cost, cc->local_set);
  } else if (const auto* sh = std::get_if<CommonCostLocal>(&data)) {
    data_dim(sh->cost, sh->local_set);
  } else if (const auto* cp = std::get_if<ConstraintCoupledLocal>(&data)) {
    int d = data_dim(cp->cost, cp->local_set);
    if (cp->coupling.input_dim() >= 0 && d >= 0 &&
        cp->coupling.input_dim() != d)
      throw std::invalid_argument(
          "coupling map dimension disagrees with the local problem");
  }
}

Agent::Agent(int id, std::vector<int> in_neighbors,
             std::vector<int> out_neighbors, std::map<int, double> weights,
             LocalData local_data, std::shared_ptr<Transport> transport,
             uint64_t global_seed)
    : id_(id),
      in_neighbors_(std::move(in_neighbors)),
      out_neighbors_(std::move(out_neighbors)),
      weights_(std::move(weights)),
      local_data_(std::move(local_data)),
      comms_(std::move(transport)),
      rng_(global_seed, static_cast<uint64_t>(id)) {
  if (id_ < 0) throw std::invalid_argument("agent id must be nonnegative");
  std::sort(in_neighbors_.begin(), in_neighbors_.end());
  std::sort(out_neighbors_.begin(), out_neighbors_.end());

  if (!weights_.empty()) {
    if (weights_.count(id_) == 0)
      throw std::invalid_argument("weight row is missing the self weight");
    for (const auto& [j, w] : weights_) {
      if (j != id_ && !std::binary_search(in_neighbors_.begin(),
                                          in_neighbors_.end(), j))
        throw std::invalid_argument("weight keyed by non-in-neighbor " +
                                    std::to_string(j));
      if (w < 0.0) throw std::invalid_argument("negative consensus weight");
    }
    for (int j : in_neighbors_) {
      if (weights_.count(j) == 0)
        throw std::invalid_argument("weight row is missing in-neighbor " +
                                    std::to_string(j));
    }
    double sum = 0.0;
    for (const auto& [j, w] : weights_) sum += w;
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("weight row does not sum to one");
  }
  validate_local_data(local_data_);
}

double Agent::weight(int j) const {
  auto it = weights_.find(j);
  if (it == weights_.end())
    throw std::invalid_argument("no weight for agent " + std::to_string(j));
  return it->second;
}

void Agent::set_problem(LocalData data) {
  validate_local_data(data);
  local_data_ = std::move(data);
}

std::map<int, std::vector<Tensor>> Agent::neighbors_exchange(
    const std::vector<Tensor>& payload, MessageKind kind) {
  return comms_.neighbors_exchange(out_neighbors_, in_neighbors_, payload,
                                   kind, round_++);
}

std::map<int, std::vector<Tensor>> Agent::neighbors_exchange_keyed(
    const std::map<int, std::vector<Tensor>>& payloads, MessageKind kind) {
  return comms_.neighbors_exchange_keyed(out_neighbors_, in_neighbors_,
                                         payloads, kind, round_++);
}

void Agent::barrier() { comms_.barrier(round_++); }

}  // namespace dopt
