#pragma once

// The storage server: localized directory, request fragmenter, disk and
// buffer managers, and (on the flagged server) the system and connection
// controller.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include "vipio/config.hpp"
#include "vipio/layout.hpp"
#include "vipio/transport.hpp"

namespace vipio::server {

using net::NodeId;

// FCFS buffer space. acquire grants min(want, capacity) once every earlier
// waiter has been served and the space is free.
class BufferManager {
 public:
  explicit BufferManager(std::uint64_t capacity);

  std::uint64_t acquire(std::uint64_t want);
  void release(std::uint64_t granted);

  std::uint64_t capacity() const { return capacity_; }
  std::uint64_t in_use() const;
  std::size_t waiting() const;

  class Grant {
   public:
    Grant(BufferManager& m, std::uint64_t want) : m_(&m), n_(m.acquire(want)) {}
    ~Grant() {
      if (m_) m_->release(n_);
    }
    Grant(const Grant&) = delete;
    Grant& operator=(const Grant&) = delete;
    std::uint64_t bytes() const { return n_; }

   private:
    BufferManager* m_;
    std::uint64_t n_;
  };

 private:
  const std::uint64_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t used_ = 0;
  std::uint64_t next_ticket_ = 0;
  std::deque<std::uint64_t> queue_;
};

// A directory-backed disk. Each (server, file) portion is one host file.
// Access costs a synthetic latency per MiB and is serialized per disk.
class Disk {
 public:
  Disk(std::filesystem::path dir, double latency_ms_per_mib);
  ~Disk();

  // Bytes past the end of the portion file read as zeros.
  void read(NodeId server, std::uint32_t file, std::uint64_t phys, std::span<std::uint8_t> out);
  void write(NodeId server, std::uint32_t file, std::uint64_t phys, std::span<const std::uint8_t> in);
  // Zeros [phys, phys+len) where the portion file already has bytes.
  void zero(NodeId server, std::uint32_t file, std::uint64_t phys, std::uint64_t len);
  void sync(NodeId server, std::uint32_t file);
  void remove(NodeId server, std::uint32_t file);

  void set_latency(double ms_per_mib);
  double latency() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  int fd(NodeId server, std::uint32_t file);
  void charge(std::uint64_t bytes);

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  double latency_;
  std::chrono::steady_clock::time_point busy_until_{};
  std::map<std::pair<NodeId, std::uint32_t>, int> fds_;
};

class Server {
 public:
  Server(config::ClusterConfig cfg, NodeId id, std::shared_ptr<net::Endpoint> ep);
  ~Server();

  void start();
  // Refuses new external requests and waits for the running ones.
  void drain();
  // Drains, waits for internal work, and stops; idempotent.
  void stop();
  // Blocks until the server stops (by stop() or a SHUTDOWN).
  void wait();
  bool running() const;
  NodeId id() const;

  BufferManager& buffers();
  Disk& disk(std::size_t index = 0);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Every server of a config inside this process, on the given network.
class Cluster {
 public:
  Cluster(config::ClusterConfig cfg, net::Network& network);
  ~Cluster();

  void stop();
  const config::ClusterConfig& config() const { return cfg_; }
  Server& server(NodeId id);

 private:
  config::ClusterConfig cfg_;
  std::vector<std::unique_ptr<Server>> servers_;
};

}  // namespace vipio::server
