#pragma once

// Cluster configuration. Line format, `#` starts a comment:
//
//   server <id> <addr> buffer=<bytes> disks=<path:lat_ms_per_mib>[,...] [sc] [cc]
//   threshold <bytes>      inline-data threshold (default 64K)
//   stripe <bytes>         default stripe size (default 64K)
//   broadcast on|off       allow BI sub-requests (default on)
//
// Byte counts accept K, M, G suffixes (powers of 1024). When no server is
// flagged sc/cc the lowest id takes the role.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vipio/transport.hpp"

namespace vipio::config {

struct DiskConfig {
  std::string path;
  double latency_ms_per_mib = 0;
};

struct ServerConfig {
  net::NodeId id = 0;
  std::string address;
  std::uint64_t buffer = 1 << 20;
  std::vector<DiskConfig> disks;
  bool sc = false;
  bool cc = false;
};

struct ClusterConfig {
  std::vector<ServerConfig> servers;  // sorted by id
  std::uint64_t inline_threshold = 64 * 1024;
  std::uint64_t stripe_size = 64 * 1024;
  bool broadcast = true;

  const ServerConfig& server(net::NodeId id) const;
  net::NodeId system_controller() const;
  net::NodeId connection_controller() const;
  std::vector<net::NodeId> server_ids() const;
  std::map<net::NodeId, std::string> addresses() const;
  // The first `n` servers; the controllers move to the lowest id if cut off.
  ClusterConfig first(std::size_t n) const;
};

// ConfigError with the offending line number.
ClusterConfig parse_config(std::string_view text);
ClusterConfig load_config(const std::filesystem::path& path);
std::string to_text(const ClusterConfig& c);

std::uint64_t parse_bytes(std::string_view s);

// n servers with one disk each under `root`/s<id>, loopback addresses
// 127.0.0.1:<base_port + id>.
ClusterConfig local_cluster(std::size_t n, const std::filesystem::path& root, std::uint64_t buffer,
                            double latency_ms_per_mib = 0, std::uint16_t base_port = 0);

}  // namespace vipio::config
