#include "vipio/layout.hpp"

#include <algorithm>

#include "json.hpp"

namespace vipio::layout {

namespace {

void push_merged(std::vector<Extent>& out, const Extent& e) {
  if (!out.empty()) {
    auto& b = out.back();
    if (b.server == e.server && b.file_offset + b.length == e.file_offset && b.phys_offset + b.length == e.phys_offset) {
      b.length += e.length;
      return;
    }
  }
  out.push_back(e);
}

void push_interval(std::vector<std::pair<std::uint64_t, std::uint64_t>>* rest, std::uint64_t off, std::uint64_t len) {
  if (!rest || len == 0) return;
  if (!rest->empty() && rest->back().first + rest->back().second == off) {
    rest->back().second += len;
  } else {
    rest->emplace_back(off, len);
  }
}

void put_ids(ByteWriter& w, const std::vector<NodeId>& ids) {
  w.u32(static_cast<std::uint32_t>(ids.size()));
  for (auto id : ids) w.u32(id);
}

std::vector<NodeId> get_ids(ByteReader& r) {
  auto n = r.u32();
  if (n * 4ull > r.remaining()) throw Error(Errc::truncated);
  std::vector<NodeId> ids(n);
  for (auto& id : ids) id = r.u32();
  return ids;
}

template <class F>
auto decoding(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::truncated) throw Error(Errc::invalid_arguments, "truncated layout");
    throw;
  }
}

}  // namespace

Layout Layout::striped(std::uint64_t stripe_size, std::vector<NodeId> servers) {
  if (stripe_size == 0 || servers.empty()) throw Error(Errc::invalid_arguments, "striping needs a stripe and servers");
  Layout l;
  l.kind_ = Kind::striped;
  l.stripe_ = stripe_size;
  l.servers_ = std::move(servers);
  return l;
}

Layout Layout::static_fit(const std::vector<NodeId>& servers, const std::vector<std::vector<view::ByteRun>>& runs) {
  if (servers.size() != runs.size()) throw Error(Errc::invalid_arguments, "one run list per server entry");
  Layout l;
  l.kind_ = Kind::static_fit;
  std::map<NodeId, std::uint64_t> cursor;
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (std::find(l.servers_.begin(), l.servers_.end(), servers[i]) == l.servers_.end()) {
      l.servers_.push_back(servers[i]);
    }
    for (const auto& r : runs[i]) {
      if (r.length <= 0) continue;
      if (r.file_offset < 0) throw Error(Errc::invalid_arguments, "negative file offset in static fit");
      auto& c = cursor[servers[i]];
      auto [it, fresh] = l.segs_.emplace(static_cast<std::uint64_t>(r.file_offset),
                                         Seg{static_cast<std::uint64_t>(r.length), servers[i], c});
      if (!fresh) throw Error(Errc::invalid_arguments, "static fit ranks overlap");
      c += static_cast<std::uint64_t>(r.length);
    }
  }
  if (l.segs_.empty()) throw Error(Errc::invalid_arguments, "static fit covers no bytes");
  std::uint64_t expect = 0;
  std::map<std::uint64_t, Seg> merged;
  for (const auto& [off, s] : l.segs_) {
    if (off != expect) throw Error(Errc::invalid_arguments, off < expect ? "static fit ranks overlap" : "static fit leaves a gap");
    expect = off + s.length;
    if (!merged.empty()) {
      auto& [poff, p] = *merged.rbegin();
      if (p.server == s.server && poff + p.length == off && p.phys + p.length == s.phys) {
        p.length += s.length;
        continue;
      }
    }
    merged.emplace(off, s);
  }
  l.segs_ = std::move(merged);
  l.tail_start_ = expect;
  l.tail_server_ = l.segs_.rbegin()->second.server;
  l.tail_phys_ = cursor[l.tail_server_];
  return l;
}

std::vector<Extent> Layout::map(std::uint64_t off, std::uint64_t len) const {
  std::vector<Extent> out;
  const std::uint64_t end = off + len;
  std::uint64_t b = off;
  if (kind_ == Kind::striped) {
    const std::uint64_t n = servers_.size();
    while (b < end) {
      std::uint64_t i = b / stripe_, within = b % stripe_;
      std::uint64_t take = std::min(stripe_ - within, end - b);
      push_merged(out, {b, take, servers_[i % n], (i / n) * stripe_ + within});
      b += take;
    }
    return out;
  }
  while (b < end) {
    if (b >= tail_start_) {
      push_merged(out, {b, end - b, tail_server_, tail_phys_ + (b - tail_start_)});
      break;
    }
    auto it = std::prev(segs_.upper_bound(b));
    std::uint64_t take = std::min(it->first + it->second.length - b, end - b);
    push_merged(out, {b, take, it->second.server, it->second.phys + (b - it->first)});
    b += take;
  }
  return out;
}

NodeId Layout::owner(std::uint64_t off) const { return map(off, 1).front().server; }

std::vector<Extent> Layout::portions(NodeId server, std::uint64_t size) const {
  std::vector<Extent> out;
  for (const auto& e : map(0, size)) {
    if (e.server == server) push_merged(out, e);
  }
  return out;
}

std::vector<std::uint8_t> Layout::serialize() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind_));
  w.u64(stripe_);
  put_ids(w, servers_);
  w.u32(static_cast<std::uint32_t>(segs_.size()));
  for (const auto& [off, s] : segs_) {
    w.u64(off);
    w.u64(s.length);
    w.u32(s.server);
    w.u64(s.phys);
  }
  w.u64(tail_start_);
  w.u32(tail_server_);
  w.u64(tail_phys_);
  return w.take();
}

Layout Layout::deserialize(std::span<const std::uint8_t> bytes) {
  return decoding([&] {
    ByteReader r(bytes);
    Layout l;
    auto kind = r.u8();
    if (kind != 1 && kind != 2) throw Error(Errc::invalid_arguments, "bad layout kind");
    l.kind_ = static_cast<Kind>(kind);
    l.stripe_ = r.u64();
    l.servers_ = get_ids(r);
    auto n = r.u32();
    if (n * 28ull > r.remaining()) throw Error(Errc::truncated);
    for (std::uint32_t i = 0; i < n; ++i) {
      auto off = r.u64();
      Seg s;
      s.length = r.u64();
      s.server = r.u32();
      s.phys = r.u64();
      l.segs_.emplace(off, s);
    }
    l.tail_start_ = r.u64();
    l.tail_server_ = r.u32();
    l.tail_phys_ = r.u64();
    if (l.servers_.empty() || (l.kind_ == Kind::striped && l.stripe_ == 0) ||
        (l.kind_ == Kind::static_fit && l.segs_.empty())) {
      throw Error(Errc::invalid_arguments, "inconsistent layout");
    }
    return l;
  });
}

std::string Layout::to_json(std::uint64_t size) const {
  nlohmann::json j;
  j["kind"] = kind_ == Kind::striped ? "striped" : "static_fit";
  if (kind_ == Kind::striped) j["stripe_size"] = stripe_;
  j["servers"] = servers_;
  j["size"] = size;
  auto portions = nlohmann::json::array();
  for (const auto& e : map(0, size)) {
    portions.push_back({{"server", e.server}, {"file_offset", e.file_offset}, {"length", e.length},
                        {"phys_offset", e.phys_offset}});
  }
  j["portions"] = portions;
  if (kind_ == Kind::static_fit) j["tail"] = {{"server", tail_server_}, {"file_offset", tail_start_}};
  return j.dump();
}

// ---------------------------------------------------------------- portions

Portions::Portions(const Layout& l, NodeId self) : self_(self), kind_(l.kind()) {
  if (kind_ == Layout::Kind::striped) {
    stripe_ = l.stripe_size();
    nservers_ = l.servers().size();
    auto it = std::find(l.servers().begin(), l.servers().end(), self);
    index_ = it == l.servers().end() ? nservers_ : static_cast<std::uint64_t>(it - l.servers().begin());
    return;
  }
  for (const auto& [off, seg] : l.segs_) {
    if (seg.server == self) own_.emplace(off, Extent{off, seg.length, self, seg.phys});
  }
  tail_start_ = l.tail_start_;
  tail_phys_ = l.tail_phys_;
  has_tail_ = l.tail_server_ == self;
}

std::vector<Extent> Portions::split(std::uint64_t off, std::uint64_t len,
                                    std::vector<std::pair<std::uint64_t, std::uint64_t>>* rest) const {
  std::vector<Extent> mine;
  const std::uint64_t end = off + len;
  std::uint64_t b = off;
  if (kind_ == Layout::Kind::striped) {
    while (b < end) {
      std::uint64_t i = b / stripe_, within = b % stripe_;
      std::uint64_t take = std::min(stripe_ - within, end - b);
      if (i % nservers_ == index_) {
        push_merged(mine, {b, take, self_, (i / nservers_) * stripe_ + within});
      } else {
        push_interval(rest, b, take);
      }
      b += take;
    }
    return mine;
  }
  while (b < end) {
    if (b >= tail_start_) {
      if (has_tail_) {
        push_merged(mine, {b, end - b, self_, tail_phys_ + (b - tail_start_)});
      } else {
        push_interval(rest, b, end - b);
      }
      break;
    }
    auto it = own_.upper_bound(b);
    if (it != own_.begin()) {
      auto& e = std::prev(it)->second;
      if (b < e.file_offset + e.length) {
        std::uint64_t take = std::min(e.file_offset + e.length - b, end - b);
        push_merged(mine, {b, take, self_, e.phys_offset + (b - e.file_offset)});
        b += take;
        continue;
      }
    }
    std::uint64_t next = std::min(end, tail_start_);
    if (it != own_.end()) next = std::min(next, it->first);
    push_interval(rest, b, next - b);
    b = next;
  }
  return mine;
}

std::vector<std::uint8_t> Portions::serialize() const {
  ByteWriter w;
  w.u32(self_);
  w.u8(static_cast<std::uint8_t>(kind_));
  w.u64(stripe_);
  w.u64(nservers_);
  w.u64(index_);
  w.u32(static_cast<std::uint32_t>(own_.size()));
  for (const auto& [off, e] : own_) {
    w.u64(off);
    w.u64(e.length);
    w.u64(e.phys_offset);
  }
  w.u8(has_tail_);
  w.u64(tail_start_);
  w.u64(tail_phys_);
  return w.take();
}

Portions Portions::deserialize(std::span<const std::uint8_t> bytes) {
  return decoding([&] {
    ByteReader r(bytes);
    Portions p;
    p.self_ = r.u32();
    auto kind = r.u8();
    if (kind != 1 && kind != 2) throw Error(Errc::invalid_arguments, "bad portion kind");
    p.kind_ = static_cast<Layout::Kind>(kind);
    p.stripe_ = r.u64();
    p.nservers_ = r.u64();
    p.index_ = r.u64();
    if (p.stripe_ == 0 || p.nservers_ == 0) throw Error(Errc::invalid_arguments, "bad portion table");
    auto n = r.u32();
    if (n * 24ull > r.remaining()) throw Error(Errc::truncated);
    for (std::uint32_t i = 0; i < n; ++i) {
      Extent e;
      e.file_offset = r.u64();
      e.length = r.u64();
      e.phys_offset = r.u64();
      e.server = p.self_;
      p.own_.emplace(e.file_offset, e);
    }
    p.has_tail_ = r.u8() != 0;
    p.tail_start_ = r.u64();
    p.tail_phys_ = r.u64();
    return p;
  });
}

// ---------------------------------------------------------------- hints

std::vector<std::uint8_t> FileHint::serialize() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  if (kind == Layout::Kind::striped) {
    w.u64(stripe_size);
    put_ids(w, servers);
  } else {
    w.u32(static_cast<std::uint32_t>(ranks.size()));
    for (const auto& rv : ranks) {
      w.u32(rv.server);
      w.i64(rv.disp);
      w.i64(rv.bytes);
      auto d = view::serialize(rv.desc);
      w.u32(static_cast<std::uint32_t>(d.size()));
      w.raw(d);
    }
  }
  return w.take();
}

FileHint FileHint::deserialize(std::span<const std::uint8_t> bytes) {
  return decoding([&] {
    ByteReader r(bytes);
    FileHint h;
    auto kind = r.u8();
    if (kind != 1 && kind != 2) throw Error(Errc::invalid_arguments, "bad hint kind");
    h.kind = static_cast<Layout::Kind>(kind);
    if (h.kind == Layout::Kind::striped) {
      h.stripe_size = r.u64();
      h.servers = get_ids(r);
    } else {
      auto n = r.u32();
      if (n * 24ull > r.remaining()) throw Error(Errc::truncated);
      for (std::uint32_t i = 0; i < n; ++i) {
        RankView rv;
        rv.server = r.u32();
        rv.disp = r.i64();
        rv.bytes = r.i64();
        auto len = r.u32();
        rv.desc = view::deserialize(r.raw(len));
        h.ranks.push_back(std::move(rv));
      }
    }
    if (!r.done()) throw Error(Errc::invalid_arguments, "trailing hint bytes");
    return h;
  });
}

Layout FileHint::materialize() const {
  if (kind == Layout::Kind::striped) return Layout::striped(stripe_size, servers);
  std::vector<NodeId> owners;
  std::vector<std::vector<view::ByteRun>> runs;
  for (const auto& rv : ranks) {
    if (rv.bytes < 0 || rv.disp < 0) throw Error(Errc::invalid_arguments, "negative hint extent");
    owners.push_back(rv.server);
    runs.push_back(rv.bytes == 0 ? std::vector<view::ByteRun>{} : view::enumerate_runs(rv.desc, rv.disp, 0, rv.bytes));
  }
  return Layout::static_fit(owners, runs);
}

FileHint striping_hint(std::uint64_t stripe_size, std::vector<NodeId> servers) {
  FileHint h;
  h.kind = Layout::Kind::striped;
  h.stripe_size = stripe_size;
  h.servers = std::move(servers);
  return h;
}

FileHint distribution_hint(const dist::RuntimeDescriptor& rd, const std::vector<NodeId>& rank_servers) {
  if (static_cast<std::int64_t>(rank_servers.size()) != rd.nprocs()) {
    throw Error(Errc::invalid_arguments, "one server per rank required");
  }
  FileHint h;
  h.kind = Layout::Kind::static_fit;
  for (std::int64_t r = 0; r < rd.nprocs(); ++r) {
    auto pv = dist::build_process_view(dist::for_rank(rd, r), r);
    h.ranks.push_back({rank_servers[static_cast<std::size_t>(r)], 0, pv.total_bytes, std::move(pv.descriptor)});
  }
  return h;
}

FileHint view_hint(const std::vector<NodeId>& rank_servers, const std::vector<std::int64_t>& disps,
                   const std::vector<dt::Datatype>& filetypes, const std::vector<std::int64_t>& bytes) {
  const auto n = rank_servers.size();
  if (disps.size() != n || filetypes.size() != n || bytes.size() != n) {
    throw Error(Errc::invalid_arguments, "hint vectors differ in length");
  }
  FileHint h;
  h.kind = Layout::Kind::static_fit;
  for (std::size_t i = 0; i < n; ++i) {
    h.ranks.push_back({rank_servers[i], disps[i], bytes[i], view::build_descriptor(filetypes[i]).desc});
  }
  return h;
}

}  // namespace vipio::layout
