#pragma once

// Message transports. An Endpoint is one node's mailbox: it sends to other
// node ids and receives everything addressed to it, in per-sender order.
//
// LoopbackNetwork delivers in process and records every send for tests.
// SocketNetwork carries u32-length-prefixed frames over TCP; a new
// connection starts with u32 "VIPT" and the connecting node's id.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "vipio/protocol.hpp"

namespace vipio::net {

using NodeId = std::uint32_t;
using proto::Message;

// Client ids start here so they never collide with server ids.
inline constexpr NodeId kFirstClientId = 0x10000;

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual NodeId id() const = 0;
  // Delivers to m.recipient. Unknown or unreachable peers raise IOFailure.
  virtual void send(Message m) = 0;
  // One logical broadcast, delivered to each of `to`.
  virtual void broadcast(const Message& m, std::span<const NodeId> to) = 0;
  // nullopt on timeout, or once closed and drained.
  virtual std::optional<Message> receive(std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;
};

class Network {
 public:
  virtual ~Network() = default;
  virtual std::shared_ptr<Endpoint> attach(NodeId id) = 0;
  virtual NodeId allocate_client_id() = 0;
};

// Blocking FIFO used by endpoints and by request routing tables.
class Mailbox {
 public:
  void push(Message m);
  std::optional<Message> pop(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> q_;
  bool closed_ = false;
};

struct TrafficRecord {
  proto::MsgType type{};
  proto::MsgClass cls{};
  NodeId sender = 0;
  NodeId recipient = 0;
  std::uint32_t client = 0;
  std::uint32_t request = 0;
  std::int32_t status = 0;
  std::uint64_t param_len = 0;
  std::uint64_t data_len = 0;
  bool broadcast = false;
};

class LoopbackNetwork : public Network {
 public:
  std::shared_ptr<Endpoint> attach(NodeId id) override;
  NodeId allocate_client_id() override;

  void set_recording(bool on);
  std::vector<TrafficRecord> traffic() const;
  void clear_traffic();

 private:
  class Port;
  friend class Port;

  void deliver(Message m, bool broadcast_copy);
  void record(const Message& m, bool broadcast);
  void detach(NodeId id);

  mutable std::mutex mu_;
  std::map<NodeId, std::shared_ptr<Mailbox>> boxes_;
  std::atomic<NodeId> next_client_{kFirstClientId};
  std::atomic<bool> recording_{false};
  mutable std::mutex rec_mu_;
  std::vector<TrafficRecord> traffic_;
};

// Node ids with an address listen on it; other ids are clients that dial
// every listed address when attached so any server can answer them.
class SocketNetwork : public Network {
 public:
  explicit SocketNetwork(std::map<NodeId, std::string> addresses);
  std::shared_ptr<Endpoint> attach(NodeId id) override;
  NodeId allocate_client_id() override;

  const std::map<NodeId, std::string>& addresses() const { return addresses_; }

 private:
  std::map<NodeId, std::string> addresses_;
};

// "host:port" with an optional host (defaults to 127.0.0.1).
std::pair<std::string, std::uint16_t> split_address(const std::string& addr);

}  // namespace vipio::net
