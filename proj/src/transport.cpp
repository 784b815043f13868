#include "dopt/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dopt {

namespace {

[[noreturn]] void throw_timeout(int from, uint64_t round) {
  throw TimeoutError("timeout waiting for agent " + std::to_string(from) +
                     " at round " + std::to_string(round));
}

void check_round(const Message& m, int from, uint64_t round) {
  if (m.sender != static_cast<uint32_t>(from))
    throw std::runtime_error("stream delivered message from agent " +
                             std::to_string(m.sender) + " on channel of " +
                             std::to_string(from));
  if (m.round != round)
    throw std::runtime_error(
        "protocol error: agent " + std::to_string(from) + " sent round " +
        std::to_string(m.round) + ", expected " + std::to_string(round));
}

}  // namespace

// Named (not in the anonymous namespace) so the hub's friend declaration
// applies.
class InProcTransport : public Transport {
 public:
  InProcTransport(InProcHub* hub, int id) : hub_(hub), id_(id) {}

  void send(int to, const Message& m) override {
    if (to < 0 || to >= hub_->size())
      throw std::invalid_argument("send to unknown agent " +
                                  std::to_string(to));
    validate_message(m);
    std::lock_guard<std::mutex> lock(hub_->mu_);
    hub_->queues_[static_cast<size_t>(id_) * hub_->size() + to].push_back(m);
    hub_->cv_.notify_all();
  }

  Message receive_from(int from, uint64_t round) override {
    if (from < 0 || from >= hub_->size())
      throw std::invalid_argument("receive from unknown agent " +
                                  std::to_string(from));
    auto& q = hub_->queues_[static_cast<size_t>(from) * hub_->size() + id_];
    std::unique_lock<std::mutex> lock(hub_->mu_);
    if (!hub_->cv_.wait_for(lock, hub_->timeout_,
                            [&] { return !q.empty(); }))
      throw_timeout(from, round);
    Message m = std::move(q.front());
    q.pop_front();
    lock.unlock();
    check_round(m, from, round);
    return m;
  }

  int self() const override { return id_; }

  std::vector<int> agent_ids() const override {
    std::vector<int> ids(static_cast<size_t>(hub_->size()));
    for (int i = 0; i < hub_->size(); ++i) ids[static_cast<size_t>(i)] = i;
    return ids;
  }

 private:
  InProcHub* hub_;
  int id_;
};

InProcHub::InProcHub(int n, std::chrono::milliseconds timeout)
    : n_(n), timeout_(timeout) {
  if (n < 1) throw std::invalid_argument("hub needs at least one agent");
  queues_.resize(static_cast<size_t>(n) * static_cast<size_t>(n));
}

std::shared_ptr<Transport> InProcHub::transport(int id) {
  if (id < 0 || id >= n_)
    throw std::invalid_argument("unknown agent id " + std::to_string(id));
  return std::make_shared<InProcTransport>(this, id);
}

std::vector<PeerAddress> parse_roster_text(const std::string& text) {
  std::vector<PeerAddress> roster;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    PeerAddress p;
    if (!(ls >> p.id >> p.host >> p.port))
      throw std::runtime_error("bad roster line: " + line);
    roster.push_back(std::move(p));
  }
  for (const auto& p : roster) {
    if (p.port < 1 || p.port > 65535)
      throw std::runtime_error("bad roster port for agent " +
                               std::to_string(p.id));
    int dup = 0;
    for (const auto& q : roster)
      if (q.id == p.id) ++dup;
    if (dup != 1)
      throw std::runtime_error("duplicate roster id " + std::to_string(p.id));
  }
  return roster;
}

std::vector<PeerAddress> read_roster_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open roster " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_roster_text(ss.str());
}

namespace {

bool send_all(int fd, const uint8_t* data, size_t n) {
  while (n > 0) {
    ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      return false;
    }
    data += k;
    n -= static_cast<size_t>(k);
  }
  return true;
}

bool recv_all(int fd, uint8_t* data, size_t n) {
  while (n > 0) {
    ssize_t k = ::recv(fd, data, n, 0);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      return false;
    }
    data += k;
    n -= static_cast<size_t>(k);
  }
  return true;
}

}  // namespace

TcpTransport::TcpTransport(int self_id, std::vector<PeerAddress> roster,
                           std::chrono::milliseconds timeout)
    : self_(self_id), roster_(std::move(roster)), timeout_(timeout) {
  std::sort(roster_.begin(), roster_.end(),
            [](const PeerAddress& a, const PeerAddress& b) {
              return a.id < b.id;
            });
  const PeerAddress& me = address_of(self_);

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("cannot create listen socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<uint16_t>(me.port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(listen_fd_);
    throw std::runtime_error("cannot bind port " + std::to_string(me.port) +
                             " for agent " + std::to_string(self_));
  }
  if (::listen(listen_fd_, 64) < 0) {
    ::close(listen_fd_);
    throw std::runtime_error("cannot listen on port " +
                             std::to_string(me.port));
  }
  accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpTransport::~TcpTransport() { shutdown(); }

void TcpTransport::shutdown() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : reader_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  {
    std::lock_guard<std::mutex> lock(send_mu_);
    for (auto& [id, fd] : out_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  for (auto& t : reader_threads_)
    if (t.joinable()) t.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  for (int fd : reader_fds_) ::close(fd);
  reader_fds_.clear();
  std::lock_guard<std::mutex> lock(send_mu_);
  for (auto& [id, fd] : out_fds_) ::close(fd);
  out_fds_.clear();
}

const PeerAddress& TcpTransport::address_of(int id) const {
  for (const auto& p : roster_)
    if (p.id == id) return p;
  throw std::invalid_argument("agent " + std::to_string(id) +
                              " is not in the roster");
}

std::vector<int> TcpTransport::agent_ids() const {
  std::vector<int> ids;
  ids.reserve(roster_.size());
  for (const auto& p : roster_) ids.push_back(p.id);
  return ids;
}

void TcpTransport::accept_loop() {
  while (true) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listen socket shut down
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    reader_fds_.push_back(fd);
    reader_threads_.emplace_back([this, fd] { reader_loop(fd); });
  }
}

void TcpTransport::reader_loop(int fd) {
  int peer = -1;
  while (true) {
    uint8_t len_bytes[4];
    if (!recv_all(fd, len_bytes, 4)) break;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
      len |= static_cast<uint32_t>(len_bytes[i]) << (8 * i);
    if (len > (1u << 30)) break;
    std::vector<uint8_t> frame(4 + len);
    std::memcpy(frame.data(), len_bytes, 4);
    if (!recv_all(fd, frame.data() + 4, len)) break;
    Message m;
    try {
      m = decode_message(frame);
    } catch (const std::exception&) {
      break;
    }
    if (m.kind == MessageKind::hello) {
      peer = static_cast<int>(m.sender);
      continue;
    }
    std::lock_guard<std::mutex> lock(mu_);
    inbox_[static_cast<int>(m.sender)].push_back(std::move(m));
    cv_.notify_all();
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (peer >= 0) closed_streams_.insert(peer);
  cv_.notify_all();
}

void TcpTransport::send(int to, const Message& m) {
  validate_message(m);
  const PeerAddress& addr = address_of(to);
  std::vector<uint8_t> frame = encode_message(m);

  std::lock_guard<std::mutex> lock(send_mu_);
  auto it = out_fds_.find(to);
  if (it == out_fds_.end()) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(addr.host.c_str(), std::to_string(addr.port).c_str(),
                      &hints, &res) != 0 ||
        res == nullptr)
      throw std::runtime_error("cannot resolve host " + addr.host);

    int fd = -1;
    auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
      if (fd < 0) {
        ::freeaddrinfo(res);
        throw std::runtime_error("cannot create socket");
      }
      if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
      if (std::chrono::steady_clock::now() >= deadline) {
        ::freeaddrinfo(res);
        throw TimeoutError("cannot connect to agent " + std::to_string(to) +
                           " at " + addr.host + ":" +
                           std::to_string(addr.port));
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    Message hello;
    hello.kind = MessageKind::hello;
    hello.sender = static_cast<uint32_t>(self_);
    std::vector<uint8_t> hf = encode_message(hello);
    if (!send_all(fd, hf.data(), hf.size())) {
      ::close(fd);
      throw std::runtime_error("handshake with agent " + std::to_string(to) +
                               " failed");
    }
    it = out_fds_.emplace(to, fd).first;
  }
  if (!send_all(it->second, frame.data(), frame.size()))
    throw std::runtime_error("connection to agent " + std::to_string(to) +
                             " lost while sending");
}

Message TcpTransport::receive_from(int from, uint64_t round) {
  address_of(from);
  std::unique_lock<std::mutex> lock(mu_);
  auto ready = [&] {
    auto it = inbox_.find(from);
    if (it != inbox_.end() && !it->second.empty()) return true;
    return closed_streams_.count(from) > 0;
  };
  if (!cv_.wait_for(lock, timeout_, ready)) throw_timeout(from, round);
  auto it = inbox_.find(from);
  if (it == inbox_.end() || it->second.empty())
    throw std::runtime_error("connection from agent " + std::to_string(from) +
                             " closed at round " + std::to_string(round));
  Message m = std::move(it->second.front());
  it->second.pop_front();
  lock.unlock();
  check_round(m, from, round);
  return m;
}

}  // namespace dopt
