#pragma once

#include <map>
#include <memory>
#include <vector>

#include "dopt/message.hpp"
#include "dopt/transport.hpp"

namespace dopt {

// Synchronous collectives on top of a transport. Every call consumes one
// round tick, so rounds strictly increase on every (sender, receiver)
// stream; all agents must issue the same sequence of collectives.
class Communicator {
 public:
  explicit Communicator(std::shared_ptr<Transport> transport);

  // Sends the same payload to every out-neighbor and returns one payload
  // per in-neighbor. Blocks until all arrive; validates round and kind.
  std::map<int, std::vector<Tensor>> neighbors_exchange(
      const std::vector<int>& out_neighbors,
      const std::vector<int>& in_neighbors, const std::vector<Tensor>& payload,
      MessageKind kind, uint64_t round);

  // Per-out-neighbor payloads; every out-neighbor must have an entry.
  std::map<int, std::vector<Tensor>> neighbors_exchange_keyed(
      const std::vector<int>& out_neighbors,
      const std::vector<int>& in_neighbors,
      const std::map<int, std::vector<Tensor>>& payloads, MessageKind kind,
      uint64_t round);

  // All-to-all handshake: returns once every agent has reached `round`.
  void barrier(uint64_t round);

  Transport& transport() { return *transport_; }

 private:
  std::shared_ptr<Transport> transport_;
};

}  // namespace dopt
