#pragma once

// In-process cluster fixture on the loopback transport.

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <unistd.h>

#include "vipio/client.hpp"
#include "vipio/config.hpp"
#include "vipio/server.hpp"
#include "vipio/transport.hpp"

namespace vipio::fixture {

inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> seq{0};
  auto p = std::filesystem::temp_directory_path() /
           ("vipio_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(seq++));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct LocalCluster {
  explicit LocalCluster(std::size_t servers, std::uint64_t buffer = 1 << 20, double latency = 0,
                        const std::string& tag = "cluster")
      : LocalCluster(config::local_cluster(servers, scratch_dir(tag), buffer, latency)) {}

  explicit LocalCluster(config::ClusterConfig c) : cfg(std::move(c)) {
    root = std::filesystem::path(cfg.servers.front().disks.front().path).parent_path();
    cluster = std::make_unique<server::Cluster>(cfg, net);
  }

  ~LocalCluster() {
    cluster.reset();
    std::error_code ec;
    std::filesystem::remove_all(root, ec);
  }

  std::unique_ptr<client::Session> session(std::optional<net::NodeId> buddy = {}) {
    client::Session::Options o;
    o.timeout = std::chrono::milliseconds(20000);
    o.preferred_buddy = buddy;
    auto s = std::make_unique<client::Session>(net, cfg, o);
    s->connect(0);
    return s;
  }

  config::ClusterConfig cfg;
  std::filesystem::path root;
  net::LoopbackNetwork net;
  std::unique_ptr<server::Cluster> cluster;
};

}  // namespace vipio::fixture
