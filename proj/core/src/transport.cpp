#include "vipio/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace vipio::net {

void Mailbox::push(Message m) {
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    q_.push_back(std::move(m));
  }
  cv_.notify_one();
}

std::optional<Message> Mailbox::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  if (!cv_.wait_for(lk, timeout, [&] { return !q_.empty() || closed_; })) return std::nullopt;
  if (q_.empty()) return std::nullopt;
  Message m = std::move(q_.front());
  q_.pop_front();
  return m;
}

void Mailbox::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
    q_.clear();
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

// ---------------------------------------------------------------- loopback

class LoopbackNetwork::Port : public Endpoint {
 public:
  Port(LoopbackNetwork* net, NodeId id, std::shared_ptr<Mailbox> box) : net_(net), id_(id), box_(std::move(box)) {}
  ~Port() override { close(); }

  NodeId id() const override { return id_; }

  void send(Message m) override {
    m.sender = id_;
    net_->record(m, false);
    net_->deliver(std::move(m), false);
  }

  void broadcast(const Message& m, std::span<const NodeId> to) override {
    Message base = m;
    base.sender = id_;
    net_->record(base, true);
    for (NodeId r : to) {
      Message copy = base;
      copy.recipient = r;
      net_->deliver(std::move(copy), true);
    }
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override { return box_->pop(timeout); }

  void close() override {
    if (closed_.exchange(true)) return;
    box_->close();
    net_->detach(id_);
  }

 private:
  LoopbackNetwork* net_;
  NodeId id_;
  std::shared_ptr<Mailbox> box_;
  std::atomic<bool> closed_{false};
};

std::shared_ptr<Endpoint> LoopbackNetwork::attach(NodeId id) {
  std::lock_guard lk(mu_);
  if (boxes_.count(id)) throw Error(Errc::invalid_arguments, "node id already attached: " + std::to_string(id));
  auto box = std::make_shared<Mailbox>();
  boxes_[id] = box;
  return std::make_shared<Port>(this, id, box);
}

NodeId LoopbackNetwork::allocate_client_id() { return next_client_++; }

void LoopbackNetwork::deliver(Message m, bool) {
  std::shared_ptr<Mailbox> box;
  {
    std::lock_guard lk(mu_);
    auto it = boxes_.find(m.recipient);
    if (it == boxes_.end()) throw Error(Errc::io_failure, "no route to node " + std::to_string(m.recipient));
    box = it->second;
  }
  box->push(std::move(m));
}

void LoopbackNetwork::detach(NodeId id) {
  std::lock_guard lk(mu_);
  boxes_.erase(id);
}

void LoopbackNetwork::record(const Message& m, bool broadcast) {
  if (!recording_) return;
  TrafficRecord r;
  r.type = m.type;
  r.cls = m.cls;
  r.sender = m.sender;
  r.recipient = m.recipient;
  r.client = m.client;
  r.request = m.request;
  r.status = m.status;
  r.param_len = m.params.size();
  r.data_len = m.data.size();
  r.broadcast = broadcast;
  std::lock_guard lk(rec_mu_);
  traffic_.push_back(r);
}

void LoopbackNetwork::set_recording(bool on) { recording_ = on; }

std::vector<TrafficRecord> LoopbackNetwork::traffic() const {
  std::lock_guard lk(rec_mu_);
  return traffic_;
}

void LoopbackNetwork::clear_traffic() {
  std::lock_guard lk(rec_mu_);
  traffic_.clear();
}

// ---------------------------------------------------------------- sockets

std::pair<std::string, std::uint16_t> split_address(const std::string& addr) {
  auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? std::string() : addr.substr(0, colon);
  std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  char* end = nullptr;
  errno = 0;
  unsigned long p = std::strtoul(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || errno != 0 || p > 65535) {
    throw Error(Errc::config_error, "bad address: " + addr);
  }
  return {host, static_cast<std::uint16_t>(p)};
}

namespace {

constexpr std::uint32_t kHandshake = 0x54504956;  // "VIPT" little-endian
constexpr std::uint32_t kMaxFrame = 1u << 30;

bool write_all(int fd, const void* p, std::size_t n) {
  auto* c = static_cast<const char*>(p);
  while (n > 0) {
    ssize_t k = ::send(fd, c, n, MSG_NOSIGNAL);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    c += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool read_all(int fd, void* p, std::size_t n) {
  auto* c = static_cast<char*>(p);
  while (n > 0) {
    ssize_t k = ::recv(fd, c, n, 0);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    c += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool write_u32(int fd, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                       static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  return write_all(fd, b, 4);
}

bool read_u32(int fd, std::uint32_t& v) {
  std::uint8_t b[4];
  if (!read_all(fd, b, 4)) return false;
  v = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

sockaddr_in resolve(const std::string& addr) {
  auto [host, port] = split_address(addr);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) {
      throw Error(Errc::io_failure, "cannot resolve " + host);
    }
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
  }
  return sa;
}

struct Conn {
  int fd = -1;
  std::mutex write_mu;
  ~Conn() {
    if (fd >= 0) ::close(fd);
  }
};

class SocketPort : public Endpoint, public std::enable_shared_from_this<SocketPort> {
 public:
  SocketPort(NodeId id, std::map<NodeId, std::string> addresses) : id_(id), addresses_(std::move(addresses)) {}

  ~SocketPort() override { close(); }

  void listen_on(const std::string& addr) {
    auto sa = resolve(addr);
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(Errc::io_failure, "socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 || ::listen(listen_fd_, 64) != 0) {
      auto msg = std::string(std::strerror(errno));
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw Error(Errc::io_failure, "listen on " + addr + ": " + msg);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    threads_.emplace_back([this] { accept_loop(); });
  }

  std::uint16_t port() const { return port_; }

  void dial_all() {
    for (const auto& [peer, addr] : addresses_) {
      if (peer != id_) connection(peer);
    }
  }

  NodeId id() const override { return id_; }

  void send(Message m) override {
    m.sender = id_;
    auto frame = proto::encode(m);
    auto c = connection(m.recipient);
    if (!c) throw Error(Errc::io_failure, "no route to node " + std::to_string(m.recipient));
    std::lock_guard lk(c->write_mu);
    if (!write_u32(c->fd, static_cast<std::uint32_t>(frame.size())) || !write_all(c->fd, frame.data(), frame.size())) {
      drop(m.recipient, c);
      throw Error(Errc::io_failure, "send to node " + std::to_string(m.recipient) + " failed");
    }
  }

  void broadcast(const Message& m, std::span<const NodeId> to) override {
    for (NodeId r : to) {
      Message copy = m;
      copy.recipient = r;
      send(std::move(copy));
    }
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override { return inbox_.pop(timeout); }

  void close() override {
    if (closing_.exchange(true)) return;
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    {
      std::lock_guard lk(mu_);
      for (auto& c : all_conns_) ::shutdown(c->fd, SHUT_RDWR);
    }
    std::vector<std::thread> ts;
    {
      std::lock_guard lk(mu_);
      ts.swap(threads_);
    }
    for (auto& t : ts) {
      if (t.joinable()) t.join();
    }
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    {
      std::lock_guard lk(mu_);
      conns_.clear();
      all_conns_.clear();
    }
    inbox_.close();
  }

 private:
  std::shared_ptr<Conn> connection(NodeId peer) {
    {
      std::lock_guard lk(mu_);
      auto it = conns_.find(peer);
      if (it != conns_.end()) return it->second;
    }
    auto a = addresses_.find(peer);
    if (a == addresses_.end() || closing_) return nullptr;
    auto sa = resolve(a->second);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return nullptr;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
      ::close(fd);
      throw Error(Errc::io_failure, "connect to " + a->second + ": " + std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (!write_u32(fd, kHandshake) || !write_u32(fd, id_)) {
      ::close(fd);
      throw Error(Errc::io_failure, "handshake with " + a->second + " failed");
    }
    auto c = std::make_shared<Conn>();
    c->fd = fd;
    std::lock_guard lk(mu_);
    auto [it, fresh] = conns_.emplace(peer, c);
    all_conns_.push_back(c);
    threads_.emplace_back([this, c, peer] { read_loop(c, peer); });
    return fresh ? c : it->second;
  }

  void accept_loop() {
    while (!closing_) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::uint32_t magic = 0, peer = 0;
      if (!read_u32(fd, magic) || magic != kHandshake || !read_u32(fd, peer)) {
        ::close(fd);
        continue;
      }
      auto c = std::make_shared<Conn>();
      c->fd = fd;
      std::lock_guard lk(mu_);
      if (closing_) return;
      conns_.emplace(peer, c);
      all_conns_.push_back(c);
      threads_.emplace_back([this, c, peer] { read_loop(c, peer); });
    }
  }

  void read_loop(std::shared_ptr<Conn> c, NodeId peer) {
    std::vector<std::uint8_t> buf;
    for (;;) {
      std::uint32_t len = 0;
      if (!read_u32(c->fd, len) || len > kMaxFrame) break;
      buf.resize(len);
      if (!read_all(c->fd, buf.data(), len)) break;
      try {
        inbox_.push(proto::decode(buf));
      } catch (const Error&) {
        break;
      }
    }
    drop(peer, c);
  }

  void drop(NodeId peer, const std::shared_ptr<Conn>& c) {
    std::lock_guard lk(mu_);
    auto it = conns_.find(peer);
    if (it != conns_.end() && it->second == c) conns_.erase(it);
    ::shutdown(c->fd, SHUT_RDWR);
  }

  NodeId id_;
  std::map<NodeId, std::string> addresses_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> closing_{false};
  std::mutex mu_;
  std::map<NodeId, std::shared_ptr<Conn>> conns_;
  std::vector<std::shared_ptr<Conn>> all_conns_;
  std::vector<std::thread> threads_;
  Mailbox inbox_;
};

}  // namespace

SocketNetwork::SocketNetwork(std::map<NodeId, std::string> addresses) : addresses_(std::move(addresses)) {
  for (const auto& [id, addr] : addresses_) split_address(addr);
}

std::shared_ptr<Endpoint> SocketNetwork::attach(NodeId id) {
  auto port = std::make_shared<SocketPort>(id, addresses_);
  auto it = addresses_.find(id);
  if (it != addresses_.end()) {
    port->listen_on(it->second);
  } else {
    port->dial_all();
  }
  return port;
}

NodeId SocketNetwork::allocate_client_id() {
  static std::atomic<NodeId> counter{0};
  return kFirstClientId + ((static_cast<NodeId>(::getpid()) & 0x3fff) << 12) + (counter++ & 0xfff);
}

}  // namespace vipio::net
