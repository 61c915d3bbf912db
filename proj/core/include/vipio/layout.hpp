#pragma once

// Physical data layouts and the file-administration hints that choose them.
//
// Striped: stripe i of the logical file lives on servers[i % n] at physical
// offset (i / n) * stripe_size.
// StaticFit: each client's byte set is stored back to back on one server;
// bytes past the covered range form an open tail on the server holding the
// last covered byte.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vipio/datatypes.hpp"
#include "vipio/distribution.hpp"
#include "vipio/transport.hpp"
#include "vipio/viewdesc.hpp"

namespace vipio::layout {

using net::NodeId;

struct Extent {
  std::uint64_t file_offset = 0;
  std::uint64_t length = 0;
  NodeId server = 0;
  std::uint64_t phys_offset = 0;

  friend bool operator==(const Extent&, const Extent&) = default;
};

class Layout {
 public:
  enum class Kind : std::uint8_t { striped = 1, static_fit = 2 };

  static Layout striped(std::uint64_t stripe_size, std::vector<NodeId> servers);
  // `runs[i]` are the bytes stored on `servers[i]`, in file order. Together
  // they must partition [0, end); InvalidArguments otherwise.
  static Layout static_fit(const std::vector<NodeId>& servers, const std::vector<std::vector<view::ByteRun>>& runs);

  Kind kind() const { return kind_; }
  std::uint64_t stripe_size() const { return stripe_; }
  const std::vector<NodeId>& servers() const { return servers_; }

  // [off, off+len) split at server boundaries, in file order.
  std::vector<Extent> map(std::uint64_t off, std::uint64_t len) const;
  NodeId owner(std::uint64_t off) const;

  // Portion table of one server (its extents below `size`, coalesced).
  std::vector<Extent> portions(NodeId server, std::uint64_t size) const;

  std::vector<std::uint8_t> serialize() const;
  static Layout deserialize(std::span<const std::uint8_t> bytes);
  std::string to_json(std::uint64_t size) const;

  friend bool operator==(const Layout&, const Layout&) = default;

 private:
  friend class Portions;

  struct Seg {
    std::uint64_t length = 0;
    NodeId server = 0;
    std::uint64_t phys = 0;
    friend bool operator==(const Seg&, const Seg&) = default;
  };

  Kind kind_ = Kind::striped;
  std::uint64_t stripe_ = 1;
  std::vector<NodeId> servers_;
  std::map<std::uint64_t, Seg> segs_;  // keyed by file offset
  std::uint64_t tail_start_ = 0;
  NodeId tail_server_ = 0;
  std::uint64_t tail_phys_ = 0;
};

// The part of a layout one server keeps in its localized directory: enough
// to recognize and place its own bytes, nothing about other servers.
class Portions {
 public:
  Portions() = default;
  Portions(const Layout& l, NodeId self);

  // Own pieces of [off, off+len); `rest` receives the intervals owned elsewhere.
  std::vector<Extent> split(std::uint64_t off, std::uint64_t len,
                            std::vector<std::pair<std::uint64_t, std::uint64_t>>* rest = nullptr) const;

  std::vector<std::uint8_t> serialize() const;
  static Portions deserialize(std::span<const std::uint8_t> bytes);

 private:
  NodeId self_ = 0;
  Layout::Kind kind_ = Layout::Kind::striped;
  std::uint64_t stripe_ = 1;
  std::uint64_t nservers_ = 1;
  std::uint64_t index_ = 0;
  std::map<std::uint64_t, Extent> own_;  // static fit
  bool has_tail_ = false;
  std::uint64_t tail_start_ = 0;
  std::uint64_t tail_phys_ = 0;
};

// File-administration hint carried by OPEN.
struct FileHint {
  struct RankView {
    NodeId server = 0;
    std::int64_t disp = 0;
    std::int64_t bytes = 0;
    view::AccessDesc desc;
  };

  Layout::Kind kind = Layout::Kind::striped;
  std::uint64_t stripe_size = 0;  // striped
  std::vector<NodeId> servers;    // striped
  std::vector<RankView> ranks;    // static fit

  std::vector<std::uint8_t> serialize() const;
  static FileHint deserialize(std::span<const std::uint8_t> bytes);

  Layout materialize() const;
};

FileHint striping_hint(std::uint64_t stripe_size, std::vector<NodeId> servers);
// One rank per process of the distribution; rank r is stored on rank_servers[r].
FileHint distribution_hint(const dist::RuntimeDescriptor& rd, const std::vector<NodeId>& rank_servers);
// One rank per filetype (each tiled from its disp for `bytes` accessible bytes).
FileHint view_hint(const std::vector<NodeId>& rank_servers, const std::vector<std::int64_t>& disps,
                   const std::vector<dt::Datatype>& filetypes, const std::vector<std::int64_t>& bytes);

}  // namespace vipio::layout
