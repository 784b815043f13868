#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dopt/message.hpp"

namespace dopt {

// Raised when a blocking receive (or connect) exceeds its deadline, so
// callers can distinguish a stalled network from other failures.
struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reliable ordered point-to-point channel between agents. Messages from a
// given sender arrive in send order; receive_from blocks for the next one
// and checks it carries the expected round.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(int to, const Message& m) = 0;
  virtual Message receive_from(int from, uint64_t round) = 0;
  virtual int self() const = 0;
  virtual std::vector<int> agent_ids() const = 0;
  virtual void shutdown() {}
};

// Deterministic in-process network: one hub shared by every agent in the
// same process, with a FIFO queue per ordered agent pair.
class InProcHub {
 public:
  explicit InProcHub(
      int n, std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::shared_ptr<Transport> transport(int id);
  int size() const { return n_; }

 private:
  friend class InProcTransport;

  int n_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::deque<Message>> queues_;  // indexed from * n_ + to
};

struct PeerAddress {
  int id = 0;
  std::string host;
  int port = 0;
};

// Roster file: one `id host port` line per agent; '#' starts a comment.
std::vector<PeerAddress> parse_roster_text(const std::string& text);
std::vector<PeerAddress> read_roster_file(const std::string& path);

// TCP transport. Each agent listens on its roster port; outbound
// connections are opened lazily on first send and announced with a hello
// frame so the receiver can attribute the stream.
class TcpTransport : public Transport {
 public:
  TcpTransport(int self_id, std::vector<PeerAddress> roster,
               std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~TcpTransport() override;

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send(int to, const Message& m) override;
  Message receive_from(int from, uint64_t round) override;
  int self() const override { return self_; }
  std::vector<int> agent_ids() const override;
  void shutdown() override;

 private:
  void accept_loop();
  void reader_loop(int fd);
  const PeerAddress& address_of(int id) const;

  int self_;
  std::vector<PeerAddress> roster_;
  std::chrono::milliseconds timeout_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::map<int, std::deque<Message>> inbox_;
  std::set<int> closed_streams_;
  bool stopping_ = false;

  int listen_fd_ = -1;
  std::thread accept_thread_;
  std::vector<std::thread> reader_threads_;
  std::vector<int> reader_fds_;

  std::mutex send_mu_;
  std::map<int, int> out_fds_;
};

}  // namespace dopt
