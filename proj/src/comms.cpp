#include "dopt/comms.hpp"

#include <algorithm>
#include <stdexcept>

namespace dopt {

namespace {

void check_kind(const Message& m, MessageKind kind) {
  if (m.kind != kind)
    throw std::runtime_error(
        "protocol error: agent " + std::to_string(m.sender) +
        " sent kind " + std::to_string(static_cast<int>(m.kind)) +
        ", expected " + std::to_string(static_cast<int>(kind)));
}

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

Communicator::Communicator(std::shared_ptr<Transport> transport)
    : transport_(std::move(transport)) {
  if (!transport_) throw std::invalid_argument("null transport");
}

std::map<int, std::vector<Tensor>> Communicator::neighbors_exchange(
    const std::vector<int>& out_neighbors, const std::vector<int>& in_neighbors,
    const std::vector<Tensor>& payload, MessageKind kind, uint64_t round) {
  Message m;
  m.sender = static_cast<uint32_t>(transport_->self());
  m.round = round;
  m.kind = kind;
  m.payload = payload;
  for (int to : sorted(out_neighbors)) transport_->send(to, m);

  std::map<int, std::vector<Tensor>> received;
  for (int from : sorted(in_neighbors)) {
    Message r = transport_->receive_from(from, round);
    check_kind(r, kind);
    received.emplace(from, std::move(r.payload));
  }
  return received;
}

std::map<int, std::vector<Tensor>> Communicator::neighbors_exchange_keyed(
    const std::vector<int>& out_neighbors, const std::vector<int>& in_neighbors,
    const std::map<int, std::vector<Tensor>>& payloads, MessageKind kind,
    uint64_t round) {
  for (int to : out_neighbors) {
    if (payloads.find(to) == payloads.end())
      throw std::invalid_argument("no payload for out-neighbor " +
                                  std::to_string(to));
  }
  for (const auto& [to, payload] : payloads) {
    if (std::find(out_neighbors.begin(), out_neighbors.end(), to) ==
        out_neighbors.end())
      throw std::invalid_argument("payload keyed by non-neighbor " +
                                  std::to_string(to));
  }
  Message m;
  m.sender = static_cast<uint32_t>(transport_->self());
  m.round = round;
  m.kind = kind;
  for (int to : sorted(out_neighbors)) {
    m.payload = payloads.at(to);
    transport_->send(to, m);
  }
  std::map<int, std::vector<Tensor>> received;
  for (int from : sorted(in_neighbors)) {
    Message r = transport_->receive_from(from, round);
    check_kind(r, kind);
    received.emplace(from, std::move(r.payload));
  }
  return received;
}

void Communicator::barrier(uint64_t round) {
  Message m;
  m.sender = static_cast<uint32_t>(transport_->self());
  m.round = round;
  m.kind = MessageKind::barrier;
  std::vector<int> ids = transport_->agent_ids();
  std::sort(ids.begin(), ids.end());
  for (int id : ids)
    if (id != transport_->self()) transport_->send(id, m);
  for (int id : ids) {
    if (id == transport_->self()) continue;
    Message r = transport_->receive_from(id, round);
    check_kind(r, MessageKind::barrier);
  }
}

}  // namespace dopt
