#include "vipio/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace vipio::config {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(Errc::config_error, "line " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view s) {
  std::string str(s);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != str.size() || v < 0) throw Error(Errc::config_error, "bad number: " + str);
  return v;
}

void elect(ClusterConfig& c) {
  auto flagged = [&](bool ServerConfig::*f) {
    return std::count_if(c.servers.begin(), c.servers.end(), [&](const auto& s) { return s.*f; });
  };
  if (flagged(&ServerConfig::sc) > 1) throw Error(Errc::config_error, "more than one sc");
  if (flagged(&ServerConfig::cc) > 1) throw Error(Errc::config_error, "more than one cc");
  if (flagged(&ServerConfig::sc) == 0) c.servers.front().sc = true;
  if (flagged(&ServerConfig::cc) == 0) c.servers.front().cc = true;
}

}  // namespace

std::uint64_t parse_bytes(std::string_view s) {
  if (s.empty()) throw Error(Errc::config_error, "empty byte count");
  std::uint64_t mult = 1;
  switch (s.back()) {
    case 'K': case 'k': mult = 1ull << 10; s.remove_suffix(1); break;
    case 'M': case 'm': mult = 1ull << 20; s.remove_suffix(1); break;
    case 'G': case 'g': mult = 1ull << 30; s.remove_suffix(1); break;
    default: break;
  }
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }) || s.size() > 15) {
    throw Error(Errc::config_error, "bad byte count: " + std::string(s));
  }
  return std::stoull(std::string(s)) * mult;
}

ClusterConfig parse_config(std::string_view text) {
  ClusterConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  std::set<net::NodeId> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    try {
      if (tok[0] == "threshold" && tok.size() == 2) {
        c.inline_threshold = parse_bytes(tok[1]);
        if (c.inline_threshold == 0) fail(lineno, "threshold must be > 0");
      } else if (tok[0] == "stripe" && tok.size() == 2) {
        c.stripe_size = parse_bytes(tok[1]);
        if (c.stripe_size == 0) fail(lineno, "stripe must be > 0");
      } else if (tok[0] == "broadcast" && tok.size() == 2 && (tok[1] == "on" || tok[1] == "off")) {
        c.broadcast = tok[1] == "on";
      } else if (tok[0] == "server") {
        if (tok.size() < 3) fail(lineno, "server needs <id> <addr>");
        ServerConfig s;
        auto id = parse_bytes(tok[1]);
        if (tok[1].find_first_not_of("0123456789") != std::string::npos || id >= net::kFirstClientId) {
          fail(lineno, "bad server id " + tok[1]);
        }
        s.id = static_cast<net::NodeId>(id);
        if (!ids.insert(s.id).second) fail(lineno, "duplicate server id " + tok[1]);
        s.address = tok[2];
        net::split_address(s.address);
        for (std::size_t i = 3; i < tok.size(); ++i) {
          const auto& t = tok[i];
          if (t == "sc") {
            s.sc = true;
          } else if (t == "cc") {
            s.cc = true;
          } else if (t.rfind("buffer=", 0) == 0) {
            s.buffer = parse_bytes(t.substr(7));
            if (s.buffer == 0) fail(lineno, "buffer must be > 0");
          } else if (t.rfind("disks=", 0) == 0) {
            std::istringstream ds(t.substr(6));
            for (std::string d; std::getline(ds, d, ',');) {
              auto colon = d.rfind(':');
              DiskConfig disk;
              disk.path = colon == std::string::npos ? d : d.substr(0, colon);
              if (colon != std::string::npos) disk.latency_ms_per_mib = parse_double(d.substr(colon + 1));
              if (disk.path.empty()) fail(lineno, "empty disk path");
              s.disks.push_back(disk);
            }
          } else {
            fail(lineno, "unknown server option " + t);
          }
        }
        if (s.disks.empty()) fail(lineno, "server " + tok[1] + " has no disks");
        c.servers.push_back(std::move(s));
      } else {
        fail(lineno, "unrecognized line");
      }
    } catch (const Error& e) {
      if (std::string(e.what()).find("line ") != std::string::npos) throw;
      fail(lineno, e.what());
    }
  }
  if (c.servers.empty()) throw Error(Errc::config_error, "no servers");
  std::sort(c.servers.begin(), c.servers.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  elect(c);
  return c;
}

ClusterConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::config_error, "cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const ClusterConfig& c) {
  std::ostringstream o;
  o << "threshold " << c.inline_threshold << "\nstripe " << c.stripe_size << "\nbroadcast "
    << (c.broadcast ? "on" : "off") << "\n";
  for (const auto& s : c.servers) {
    o << "server " << s.id << " " << s.address << " buffer=" << s.buffer << " disks=";
    for (std::size_t i = 0; i < s.disks.size(); ++i) {
      o << (i ? "," : "") << s.disks[i].path << ":" << s.disks[i].latency_ms_per_mib;
    }
    if (s.sc) o << " sc";
    if (s.cc) o << " cc";
    o << "\n";
  }
  return o.str();
}

const ServerConfig& ClusterConfig::server(net::NodeId id) const {
  for (const auto& s : servers) {
    if (s.id == id) return s;
  }
  throw Error(Errc::config_error, "no server " + std::to_string(id));
}

net::NodeId ClusterConfig::system_controller() const {
  for (const auto& s : servers) {
    if (s.sc) return s.id;
  }
  throw Error(Errc::no_controller);
}

net::NodeId ClusterConfig::connection_controller() const {
  for (const auto& s : servers) {
    if (s.cc) return s.id;
  }
  throw Error(Errc::no_controller);
}

std::vector<net::NodeId> ClusterConfig::server_ids() const {
  std::vector<net::NodeId> ids;
  for (const auto& s : servers) ids.push_back(s.id);
  return ids;
}

std::map<net::NodeId, std::string> ClusterConfig::addresses() const {
  std::map<net::NodeId, std::string> m;
  for (const auto& s : servers) m[s.id] = s.address;
  return m;
}

ClusterConfig ClusterConfig::first(std::size_t n) const {
  if (n == 0 || n > servers.size()) throw Error(Errc::config_error, "cannot take " + std::to_string(n) + " servers");
  ClusterConfig c = *this;
  c.servers.resize(n);
  bool sc = false, cc = false;
  for (const auto& s : c.servers) {
    sc |= s.sc;
    cc |= s.cc;
  }
  if (!sc) c.servers.front().sc = true;
  if (!cc) c.servers.front().cc = true;
  return c;
}

ClusterConfig local_cluster(std::size_t n, const std::filesystem::path& root, std::uint64_t buffer,
                            double latency_ms_per_mib, std::uint16_t base_port) {
  ClusterConfig c;
  for (std::size_t i = 0; i < n; ++i) {
    ServerConfig s;
    s.id = static_cast<net::NodeId>(i);
    s.address = "127.0.0.1:" + std::to_string(base_port ? base_port + i : 0);
    s.buffer = buffer;
    s.disks.push_back({(root / ("s" + std::to_string(i))).string(), latency_ms_per_mib});
    s.sc = s.cc = i == 0;
    c.servers.push_back(std::move(s));
  }
  return c;
}

}  // namespace vipio::config
