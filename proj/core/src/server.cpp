#include "vipio/server.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <limits>
#include <optional>
#include <shared_mutex>
#include <thread>

#include "json.hpp"
#include "vipio/protocol.hpp"
#include "vipio/viewdesc.hpp"

namespace vipio::server {

using proto::AckKind;
using proto::AckParams;
using proto::Message;
using proto::MsgClass;
using proto::MsgType;
using proto::Piece;
using proto::Segment;

namespace {

constexpr auto kPoll = std::chrono::milliseconds(20);
constexpr auto kCallTimeout = std::chrono::seconds(60);

}  // namespace

// ---------------------------------------------------------------- buffers

BufferManager::BufferManager(std::uint64_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(Errc::invalid_arguments, "buffer capacity must be > 0");
}

std::uint64_t BufferManager::acquire(std::uint64_t want) {
  if (want == 0) throw Error(Errc::invalid_arguments, "buffer request of 0 bytes");
  const auto grant = std::min(want, capacity_);
  std::unique_lock lk(mu_);
  const auto ticket = next_ticket_++;
  queue_.push_back(ticket);
  cv_.wait(lk, [&] { return queue_.front() == ticket && used_ + grant <= capacity_; });
  queue_.pop_front();
  used_ += grant;
  cv_.notify_all();
  return grant;
}

void BufferManager::release(std::uint64_t granted) {
  {
    std::lock_guard lk(mu_);
    used_ -= granted;
  }
  cv_.notify_all();
}

std::uint64_t BufferManager::in_use() const {
  std::lock_guard lk(mu_);
  return used_;
}

std::size_t BufferManager::waiting() const {
  std::lock_guard lk(mu_);
  return queue_.size();
}

// ---------------------------------------------------------------- disks

Disk::Disk(std::filesystem::path dir, double latency_ms_per_mib) : dir_(std::move(dir)), latency_(latency_ms_per_mib) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create disk directory " + dir_.string() + ": " + ec.message());
}

Disk::~Disk() {
  for (auto& [k, f] : fds_) ::close(f);
}

int Disk::fd(NodeId server, std::uint32_t file) {
  auto key = std::make_pair(server, file);
  auto it = fds_.find(key);
  if (it != fds_.end()) return it->second;
  auto path = dir_ / ("s" + std::to_string(server) + "_f" + std::to_string(file) + ".dat");
  int f = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (f < 0) throw Error(Errc::io_failure, "open " + path.string() + ": " + std::strerror(errno));
  fds_[key] = f;
  return f;
}

void Disk::charge(std::uint64_t bytes) {
  if (latency_ <= 0 || bytes == 0) return;
  auto cost = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double, std::milli>(latency_ * static_cast<double>(bytes) / (1 << 20)));
  auto now = std::chrono::steady_clock::now();
  // Back-to-back accesses chain their deadlines so oversleeping does not add up.
  auto start = now - busy_until_ < std::chrono::milliseconds(1) ? busy_until_ : now;
  busy_until_ = start + cost;
  std::this_thread::sleep_until(busy_until_);
}

void Disk::read(NodeId server, std::uint32_t file, std::uint64_t phys, std::span<std::uint8_t> out) {
  std::lock_guard lk(mu_);
  int f = fd(server, file);
  std::size_t done = 0;
  while (done < out.size()) {
    ssize_t k = ::pread(f, out.data() + done, out.size() - done, static_cast<off_t>(phys + done));
    if (k < 0 && errno == EINTR) continue;
    if (k < 0) throw Error(Errc::io_failure, std::string("pread: ") + std::strerror(errno));
    if (k == 0) break;
    done += static_cast<std::size_t>(k);
  }
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(done), out.end(), 0);
  charge(out.size());
}

void Disk::write(NodeId server, std::uint32_t file, std::uint64_t phys, std::span<const std::uint8_t> in) {
  std::lock_guard lk(mu_);
  int f = fd(server, file);
  std::size_t done = 0;
  while (done < in.size()) {
    ssize_t k = ::pwrite(f, in.data() + done, in.size() - done, static_cast<off_t>(phys + done));
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) throw Error(Errc::io_failure, std::string("pwrite: ") + std::strerror(errno));
    done += static_cast<std::size_t>(k);
  }
  charge(in.size());
}

void Disk::zero(NodeId server, std::uint32_t file, std::uint64_t phys, std::uint64_t len) {
  std::lock_guard lk(mu_);
  int f = fd(server, file);
  struct stat st{};
  if (::fstat(f, &st) != 0) throw Error(Errc::io_failure, std::string("fstat: ") + std::strerror(errno));
  const auto have = static_cast<std::uint64_t>(st.st_size);
  if (phys >= have) return;
  len = std::min(len, have - phys);
  if (phys + len == have) {
    if (::ftruncate(f, static_cast<off_t>(phys)) != 0) throw Error(Errc::io_failure, "ftruncate failed");
    return;
  }
  std::vector<std::uint8_t> zeros(std::min<std::uint64_t>(len, 1 << 16), 0);
  for (std::uint64_t done = 0; done < len;) {
    auto n = std::min<std::uint64_t>(zeros.size(), len - done);
    if (::pwrite(f, zeros.data(), n, static_cast<off_t>(phys + done)) != static_cast<ssize_t>(n)) {
      throw Error(Errc::io_failure, "pwrite zeros failed");
    }
    done += n;
  }
}

void Disk::sync(NodeId server, std::uint32_t file) {
  std::lock_guard lk(mu_);
  ::fsync(fd(server, file));
}

void Disk::remove(NodeId server, std::uint32_t file) {
  std::lock_guard lk(mu_);
  auto key = std::make_pair(server, file);
  if (auto it = fds_.find(key); it != fds_.end()) {
    ::close(it->second);
    fds_.erase(it);
  }
  std::error_code ec;
  std::filesystem::remove(dir_ / ("s" + std::to_string(server) + "_f" + std::to_string(file) + ".dat"), ec);
}

void Disk::set_latency(double ms_per_mib) {
  std::lock_guard lk(mu_);
  latency_ = ms_per_mib;
}

double Disk::latency() const {
  std::lock_guard lk(mu_);
  return latency_;
}

// ---------------------------------------------------------------- server

namespace {

struct FileEntry {
  std::uint32_t id = 0;
  std::string name;
  std::atomic<std::uint64_t> size{0};
  layout::Portions portions;
  std::mutex known_mu;
  std::optional<layout::Layout> known;  // set once a hinted open passed through here
  std::shared_mutex rw;
};

struct ViewState {
  std::int64_t disp = 0;
  view::AccessDesc desc;
};

struct LocalPiece {
  std::uint64_t phys = 0;
  std::uint64_t length = 0;
  std::uint64_t stream = 0;
};

struct RegistryEntry {
  std::uint32_t id = 0;
  layout::Layout layout;
};

struct BarrierState {
  std::uint32_t expected = 0;
  std::uint32_t arrived = 0;
  std::uint8_t etype = 0;
  bool mismatch = false;
  std::uint64_t generation = 0;
  std::map<std::uint64_t, bool> outcome;
};

void add_segment(std::vector<Segment>& segs, std::uint64_t stream, std::uint64_t len) {
  if (!segs.empty() && segs.back().stream_offset + segs.back().length == stream) {
    segs.back().length += len;
  } else {
    segs.push_back({stream, len});
  }
}

std::vector<Segment> segments_of(const std::vector<LocalPiece>& ps) {
  std::vector<Segment> segs;
  for (const auto& p : ps) add_segment(segs, p.stream, p.length);
  return segs;
}

std::vector<Segment> segments_of(const std::vector<Piece>& ps) {
  std::vector<Segment> segs;
  for (const auto& p : ps) add_segment(segs, p.stream_offset, p.length);
  return segs;
}

// Bytes of a request stream, either the whole stream or a list of pieces
// packed back to back.
class StreamData {
 public:
  explicit StreamData(std::span<const std::uint8_t> whole) : data_(whole) { index_.push_back({0, whole.size(), 0}); }
  StreamData(const std::vector<Piece>& pieces, std::span<const std::uint8_t> packed) : data_(packed) {
    std::uint64_t at = 0;
    for (const auto& p : pieces) {
      index_.push_back({p.stream_offset, p.length, at});
      at += p.length;
    }
    if (at != packed.size()) throw Error(Errc::invalid_arguments, "inline data does not match the pieces");
    std::sort(index_.begin(), index_.end(), [](const auto& a, const auto& b) { return a.stream < b.stream; });
  }

  std::span<const std::uint8_t> at(std::uint64_t stream, std::uint64_t len) const {
    auto it = std::upper_bound(index_.begin(), index_.end(), stream,
                               [](std::uint64_t s, const Entry& e) { return s < e.stream; });
    if (it == index_.begin()) throw Error(Errc::invalid_arguments, "stream offset outside inline data");
    --it;
    if (stream + len > it->stream + it->length) throw Error(Errc::invalid_arguments, "stream range outside inline data");
    return data_.subspan(it->data + (stream - it->stream), len);
  }

 private:
  struct Entry {
    std::uint64_t stream, length, data;
  };
  std::span<const std::uint8_t> data_;
  std::vector<Entry> index_;
};

}  // namespace

struct Server::Impl {
  config::ClusterConfig cfg;
  NodeId self;
  std::shared_ptr<net::Endpoint> ep;
  std::vector<std::unique_ptr<Disk>> disks;
  BufferManager buffers;
  std::vector<NodeId> servers;
  bool is_sc = false;
  bool is_cc = false;

  std::mutex dir_mu;
  std::map<std::uint32_t, std::shared_ptr<FileEntry>> files;

  std::mutex view_mu;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::shared_ptr<const ViewState>> views;

  std::mutex route_mu;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::shared_ptr<net::Mailbox>> routes;
  std::atomic<std::uint32_t> next_internal{1};

  // controller state
  std::mutex ctl_mu;
  std::map<std::string, RegistryEntry> registry;
  std::uint32_t next_file = 1;
  std::size_t rr = 0;
  std::map<std::uint32_t, NodeId> clients;
  std::mutex bar_mu;
  std::condition_variable bar_cv;
  std::map<std::string, BarrierState> barriers;

  // lifecycle
  std::thread dispatcher;
  std::atomic<bool> draining{false};
  std::atomic<bool> stop_flag{false};
  std::mutex act_mu;
  std::condition_variable act_cv;
  int active = 0;
  int er_active = 0;
  bool stopped = false;

  Impl(config::ClusterConfig c, NodeId id, std::shared_ptr<net::Endpoint> e)
      : cfg(std::move(c)), self(id), ep(std::move(e)), buffers(cfg.server(id).buffer), servers(cfg.server_ids()) {
    const auto& sc = cfg.server(id);
    for (const auto& d : sc.disks) disks.push_back(std::make_unique<Disk>(d.path, d.latency_ms_per_mib));
    is_sc = sc.sc;
    is_cc = sc.cc;
  }

  Disk& disk() { return *disks.front(); }

  // ------------------------------------------------------------ plumbing

  void send(Message m) {
    m.sender = self;
    ep->send(std::move(m));
  }

  void send_quietly(Message m) {
    try {
      send(std::move(m));
    } catch (const std::exception&) {
    }
  }

  class Route {
   public:
    Route(Impl& s, std::uint32_t client, std::uint32_t request) : s_(s), key_(client, request) {
      box_ = std::make_shared<net::Mailbox>();
      std::lock_guard lk(s_.route_mu);
      s_.routes[key_] = box_;
    }
    ~Route() {
      std::lock_guard lk(s_.route_mu);
      s_.routes.erase(key_);
    }
    Message next() {
      auto m = box_->pop(std::chrono::duration_cast<std::chrono::milliseconds>(kCallTimeout));
      if (!m) throw Error(Errc::timeout, "no reply");
      return std::move(*m);
    }

   private:
    Impl& s_;
    std::pair<std::uint32_t, std::uint32_t> key_;
    std::shared_ptr<net::Mailbox> box_;
  };

  void route(Message m) {
    std::shared_ptr<net::Mailbox> box;
    {
      std::lock_guard lk(route_mu);
      auto it = routes.find({m.client, m.request});
      if (it == routes.end()) return;
      box = it->second;
    }
    box->push(std::move(m));
  }

  static Message expect_ok(Message rep) {
    if (!rep.ok()) throw Error(rep.error(), "remote request failed");
    return rep;
  }

  // Internal request to another server, or handled in place for ourselves.
  Message call(NodeId to, Message m) {
    m.sender = self;
    m.recipient = to;
    if (to == self) {
      m.client = self;
      return control(m);
    }
    m.client = self;
    m.request = next_internal++;
    Route r(*this, self, m.request);
    send(m);
    return expect_ok(r.next());
  }

  void broadcast_call(Message m, const std::vector<NodeId>& to) {
    if (to.empty()) return;
    m.sender = self;
    m.client = self;
    m.request = next_internal++;
    m.cls = MsgClass::bi;
    Route r(*this, self, m.request);
    ep->broadcast(m, to);
    for (std::size_t i = 0; i < to.size(); ++i) expect_ok(r.next());
  }

  std::vector<NodeId> others() const {
    std::vector<NodeId> o;
    for (auto s : servers) {
      if (s != self) o.push_back(s);
    }
    return o;
  }

  std::shared_ptr<FileEntry> find_entry(std::uint32_t id) {
    std::lock_guard lk(dir_mu);
    auto it = files.find(id);
    return it == files.end() ? nullptr : it->second;
  }

  std::shared_ptr<FileEntry> entry(std::uint32_t id) {
    auto e = find_entry(id);
    if (!e) throw Error(Errc::unknown_file, "file id " + std::to_string(id));
    return e;
  }

  // ------------------------------------------------------------ lifecycle

  void dispatch_loop() {
    while (!stop_flag) {
      auto m = ep->receive(kPoll);
      if (!m) continue;
      if (m->cls == MsgClass::ack || m->type == MsgType::data) {
        route(std::move(*m));
        continue;
      }
      if (m->cls == MsgClass::er && draining && m->type != MsgType::shutdown) {
        send_quietly(proto::error_reply(*m, self, Errc::refused));
        continue;
      }
      spawn(std::move(*m));
    }
    ep->close();
    std::lock_guard lk(act_mu);
    stopped = true;
    act_cv.notify_all();
  }

  void spawn(Message m) {
    const bool external = m.cls == MsgClass::er;
    {
      std::lock_guard lk(act_mu);
      ++active;
      if (external) ++er_active;
    }
    std::thread([this, m = std::move(m), external] {
      handle(m);
      std::lock_guard lk(act_mu);
      --active;
      if (external) --er_active;
      act_cv.notify_all();
    }).detach();
  }

  // Waits until no external request other than the caller's is running.
  void wait_external(int own) {
    std::unique_lock lk(act_mu);
    act_cv.wait(lk, [&] { return er_active <= own; });
  }

  void wait_all(int own) {
    std::unique_lock lk(act_mu);
    act_cv.wait(lk, [&] { return active <= own; });
  }

  // ------------------------------------------------------------ dispatch

  void handle(const Message& m) {
    try {
      if ((m.type == MsgType::read || m.type == MsgType::write) && m.cls != MsgClass::er) {
        sub_access(m);
      } else if (m.type == MsgType::read || m.type == MsgType::write) {
        external_access(m);
      } else if (m.type == MsgType::shutdown) {
        shutdown(m);
      } else {
        send(control(m));
      }
    } catch (const Error& e) {
      send_quietly(proto::error_reply(m, self, e.code()));
    } catch (const std::exception&) {
      send_quietly(proto::error_reply(m, self, Errc::io_failure));
    }
  }

  Message control(const Message& m) {
    switch (m.type) {
      case MsgType::connect: return do_connect(m);
      case MsgType::disconnect: return do_disconnect(m);
      case MsgType::open: return m.cls == MsgClass::er ? buddy_open(m) : controller_open(m);
      case MsgType::close: return do_close(m);
      case MsgType::remove: return m.cls == MsgClass::er ? forward_to_sc(m) : controller_remove(m);
      case MsgType::set_size:
        if (m.cls == MsgClass::er) return forward_to_sc(m);
        if (m.cls == MsgClass::di) return controller_set_size(m);
        return apply_size(m);
      case MsgType::get_size: return do_get_size(m);
      case MsgType::set_view: return do_set_view(m);
      case MsgType::hint: return do_hint(m);
      case MsgType::admin: return do_admin(m);
      default: throw Error(Errc::invalid_arguments, std::string("unexpected ") + proto::type_name(m.type));
    }
  }

  // ------------------------------------------------------------ controller

  void require_sc() const {
    if (!is_sc) throw Error(Errc::not_controller);
  }
  void require_cc() const {
    if (!is_cc) throw Error(Errc::not_controller);
  }

  Message do_connect(const Message& m) {
    require_cc();
    ByteReader r(m.params);
    NodeId buddy = 0;
    std::lock_guard lk(ctl_mu);
    if (r.remaining() >= 4) {
      buddy = r.u32();
      if (std::find(servers.begin(), servers.end(), buddy) == servers.end()) {
        throw Error(Errc::invalid_arguments, "topology hint names unknown server");
      }
    } else {
      buddy = servers[rr++ % servers.size()];
    }
    clients[m.client] = buddy;
    Message rep = proto::reply_to(m, self);
    ByteWriter w;
    w.u32(buddy);
    rep.params = w.take();
    return rep;
  }

  Message do_disconnect(const Message& m) {
    require_cc();
    std::lock_guard lk(ctl_mu);
    if (clients.erase(m.client) == 0) throw Error(Errc::not_connected);
    return proto::reply_to(m, self);
  }

  Message forward_to_sc(const Message& m) {
    Message fwd = m;
    fwd.cls = MsgClass::di;
    auto rep = call(cfg.system_controller(), fwd);
    Message out = proto::reply_to(m, self);
    out.params = rep.params;
    return out;
  }

  Message buddy_open(const Message& m) {
    auto op = proto::unpack<proto::OpenParams>(m.params);
    Message fwd = m;
    fwd.cls = MsgClass::di;
    auto rep = call(cfg.system_controller(), fwd);
    auto r = proto::unpack<proto::OpenReply>(rep.params);
    if (!op.hint.empty()) {
      auto e = entry(r.file_id);
      std::lock_guard lk(e->known_mu);
      e->known = layout::Layout::deserialize(r.layout);
    }
    Message out = proto::reply_to(m, self);
    out.file = r.file_id;
    out.params = proto::pack(proto::OpenReply{r.file_id, r.size, {}});
    return out;
  }

  Message controller_open(const Message& m) {
    require_sc();
    auto op = proto::unpack<proto::OpenParams>(m.params);
    mode::check(op.flags);
    if (op.name.empty()) throw Error(Errc::invalid_arguments, "empty file name");
    std::lock_guard lk(ctl_mu);
    auto it = registry.find(op.name);
    if (it != registry.end() && (op.flags & mode::create) && (op.flags & mode::excl)) throw Error(Errc::exists, op.name);
    if (it == registry.end() && !(op.flags & mode::create)) throw Error(Errc::no_such_file, op.name);
    if (it == registry.end()) {
      RegistryEntry re;
      re.id = next_file++;
      re.layout = op.hint.empty() ? layout::Layout::striped(cfg.stripe_size, servers)
                                  : layout::FileHint::deserialize(op.hint).materialize();
      for (auto s : re.layout.servers()) {
        if (std::find(servers.begin(), servers.end(), s) == servers.end()) {
          throw Error(Errc::invalid_arguments, "layout names unknown server " + std::to_string(s));
        }
      }
      for (auto s : servers) {
        Message inst;
        inst.type = MsgType::admin;
        inst.cls = MsgClass::di;
        inst.file = re.id;
        ByteWriter w;
        w.u8(static_cast<std::uint8_t>(proto::AdminOp::install));
        w.u32(re.id);
        w.str(op.name);
        w.u64(0);
        auto portions = layout::Portions(re.layout, s).serialize();
        w.u32(static_cast<std::uint32_t>(portions.size()));
        w.raw(portions);
        inst.params = w.take();
        call(s, inst);
      }
      it = registry.emplace(op.name, std::move(re)).first;
    }
    auto e = entry(it->second.id);
    Message out = proto::reply_to(m, self);
    out.file = it->second.id;
    out.params = proto::pack(proto::OpenReply{it->second.id, e->size.load(), it->second.layout.serialize()});
    return out;
  }

  Message controller_remove(const Message& m) {
    require_sc();
    ByteReader r(m.params);
    auto name = r.str();
    std::lock_guard lk(ctl_mu);
    auto it = registry.find(name);
    if (it == registry.end()) throw Error(Errc::no_such_file, name);
    for (auto s : servers) {
      Message drop;
      drop.type = MsgType::admin;
      drop.cls = MsgClass::di;
      drop.file = it->second.id;
      ByteWriter w;
      w.u8(static_cast<std::uint8_t>(proto::AdminOp::drop));
      w.u32(it->second.id);
      drop.params = w.take();
      call(s, drop);
    }
    registry.erase(it);
    return proto::reply_to(m, self);
  }

  Message controller_set_size(const Message& m) {
    require_sc();
    auto sp = proto::unpack<proto::SizeParams>(m.params);
    if (sp.mode == proto::SizeMode::get) throw Error(Errc::invalid_arguments, "get through SET_SIZE");
    entry(m.file);
    Message bi;
    bi.type = MsgType::set_size;
    bi.file = m.file;
    bi.params = m.params;
    broadcast_call(bi, others());
    Message local = m;
    local.cls = MsgClass::bi;
    apply_size(local);
    return proto::reply_to(m, self);
  }

  Message apply_size(const Message& m) {
    auto sp = proto::unpack<proto::SizeParams>(m.params);
    auto e = entry(m.file);
    if (sp.mode == proto::SizeMode::extend) {
      auto cur = e->size.load();
      while (cur < sp.size && !e->size.compare_exchange_weak(cur, sp.size)) {
      }
    } else if (sp.mode == proto::SizeMode::set) {
      std::unique_lock lk(e->rw);
      auto old = e->size.load();
      if (sp.size < old) {
        for (const auto& x : e->portions.split(sp.size, old - sp.size)) disk().zero(self, e->id, x.phys_offset, x.length);
      }
      e->size = sp.size;
    } else {
      throw Error(Errc::invalid_arguments, "bad size mode");
    }
    return proto::reply_to(m, self);
  }

  Message do_get_size(const Message& m) {
    auto e = entry(m.file);
    Message rep = proto::reply_to(m, self);
    rep.params = proto::pack(proto::SizeParams{proto::SizeMode::get, e->size.load()});
    return rep;
  }

  Message do_set_view(const Message& m) {
    auto p = proto::unpack<proto::SetViewParams>(m.params);
    auto v = std::make_shared<ViewState>();
    v->disp = static_cast<std::int64_t>(p.disp);
    v->desc = view::deserialize(p.descriptor);
    if (v->desc.total_actual <= 0) throw Error(Errc::invalid_arguments, "view has no accessible bytes");
    std::lock_guard lk(view_mu);
    views[{m.client, p.handle}] = std::move(v);
    return proto::reply_to(m, self);
  }

  Message do_close(const Message& m) {
    ByteReader r(m.params);
    auto handle = r.u32();
    std::lock_guard lk(view_mu);
    views.erase({m.client, handle});
    return proto::reply_to(m, self);
  }

  std::shared_ptr<const ViewState> find_view(std::uint32_t client, std::uint32_t handle) {
    std::lock_guard lk(view_mu);
    auto it = views.find({client, handle});
    return it == views.end() ? nullptr : it->second;
  }

  Message do_hint(const Message& m) {
    ByteReader r(m.params);
    auto kind = r.u8();
    if (kind == static_cast<std::uint8_t>(proto::HintKind::prefetch)) return proto::reply_to(m, self);
    if (kind != static_cast<std::uint8_t>(proto::HintKind::administration)) {
      throw Error(Errc::invalid_arguments, "unknown hint kind");
    }
    auto target = r.u32();
    auto disk_index = r.u32();
    auto latency_us = r.u64();
    if (target != self) {
      if (m.cls != MsgClass::er) throw Error(Errc::invalid_arguments, "hint for another server");
      Message fwd = m;
      fwd.cls = MsgClass::di;
      call(target, fwd);
      return proto::reply_to(m, self);
    }
    if (disk_index >= disks.size()) throw Error(Errc::invalid_arguments, "no such disk");
    disks[disk_index]->set_latency(static_cast<double>(latency_us) / 1000.0);
    return proto::reply_to(m, self);
  }

  Message do_admin(const Message& m) {
    ByteReader r(m.params);
    auto op = static_cast<proto::AdminOp>(r.u8());
    Message rep = proto::reply_to(m, self);
    switch (op) {
      case proto::AdminOp::install: {
        auto e = std::make_shared<FileEntry>();
        e->id = r.u32();
        e->name = r.str();
        e->size = r.u64();
        auto n = r.u32();
        e->portions = layout::Portions::deserialize(r.raw(n));
        // A new file; ids restart with the process, so clear what an earlier run left.
        for (auto& d : disks) d->remove(self, e->id);
        std::lock_guard lk(dir_mu);
        files[e->id] = std::move(e);
        return rep;
      }
      case proto::AdminOp::drop: {
        auto id = r.u32();
        {
          std::lock_guard lk(dir_mu);
          files.erase(id);
        }
        for (auto& d : disks) d->remove(self, id);
        return rep;
      }
      case proto::AdminOp::inspect: {
        require_sc();
        auto name = r.str();
        std::lock_guard lk(ctl_mu);
        auto it = registry.find(name);
        if (it == registry.end()) throw Error(Errc::no_such_file, name);
        auto j = nlohmann::json::parse(it->second.layout.to_json(entry(it->second.id)->size.load()));
        j["file_id"] = it->second.id;
        j["name"] = name;
        ByteWriter w;
        w.str(j.dump());
        rep.params = w.take();
        return rep;
      }
      case proto::AdminOp::barrier: {
        require_cc();
        auto group = r.str();
        auto count = r.u32();
        auto etype = r.u8();
        if (count == 0) throw Error(Errc::invalid_arguments, "barrier of 0");
        std::unique_lock lk(bar_mu);
        auto& b = barriers[group];
        if (b.arrived == 0) {
          b.expected = count;
          b.etype = etype;
          b.mismatch = false;
        } else if (b.etype != etype || b.expected != count) {
          b.mismatch = true;
        }
        const auto gen = b.generation;
        if (++b.arrived == b.expected) {
          b.outcome[gen] = b.mismatch;
          if (gen >= 8) b.outcome.erase(gen - 8);
          b.arrived = 0;
          ++b.generation;
          bar_cv.notify_all();
        } else if (!bar_cv.wait_for(lk, kCallTimeout, [&] { return b.generation != gen; })) {
          --b.arrived;
          throw Error(Errc::timeout, "barrier " + group);
        }
        if (b.outcome[gen]) throw Error(Errc::etype_mismatch, "group " + group + " disagrees on etype");
        return rep;
      }
      case proto::AdminOp::sync: {
        auto e = entry(m.file);
        std::shared_lock lk(e->rw);
        for (auto& d : disks) d->sync(self, e->id);
        return rep;
      }
    }
    throw Error(Errc::invalid_arguments, "unknown admin op");
  }

  void shutdown(const Message& m) {
    if (m.cls == MsgClass::er) {
      require_sc();
      draining = true;
      Message phase;
      phase.type = MsgType::shutdown;
      phase.cls = MsgClass::di;
      for (auto ph : {proto::ShutdownPhase::drain, proto::ShutdownPhase::stop}) {
        phase.params = {static_cast<std::uint8_t>(ph)};
        for (auto s : others()) {
          try {
            call(s, phase);
          } catch (const Error&) {
          }
        }
        if (ph == proto::ShutdownPhase::drain) wait_external(1);
      }
      send_quietly(proto::reply_to(m, self));
      wait_all(1);
      stop_flag = true;
      return;
    }
    auto ph = m.params.empty() ? 0 : m.params[0];
    if (ph == static_cast<std::uint8_t>(proto::ShutdownPhase::drain)) {
      draining = true;
      wait_external(0);
      send(proto::reply_to(m, self));
    } else if (ph == static_cast<std::uint8_t>(proto::ShutdownPhase::stop)) {
      draining = true;
      wait_all(1);
      send(proto::reply_to(m, self));
      stop_flag = true;
    } else {
      throw Error(Errc::invalid_arguments, "bad shutdown phase");
    }
  }

  // ------------------------------------------------------------ data path

  std::vector<Piece> request_pieces(const Message& m, const proto::AccessParams& a, std::uint64_t clip) {
    std::vector<Piece> pieces;
    if (a.length == 0) return pieces;
    constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (a.offset > kMax || a.length > kMax) throw Error(Errc::invalid_arguments, "offset out of range");
    std::vector<view::ByteRun> runs;
    std::shared_ptr<const ViewState> v = a.use_view ? find_view(m.client, a.handle) : nullptr;
    if (v) {
      runs = view::enumerate_runs(v->desc, v->disp, static_cast<std::int64_t>(a.offset),
                                  static_cast<std::int64_t>(a.length));
    } else {
      runs.push_back({static_cast<std::int64_t>(a.offset), static_cast<std::int64_t>(a.length)});
    }
    std::uint64_t stream = 0;
    for (const auto& r : runs) {
      auto off = static_cast<std::uint64_t>(r.file_offset);
      auto len = static_cast<std::uint64_t>(r.length);
      if (off >= clip) break;
      auto take = std::min(len, clip - off);
      pieces.push_back({off, take, stream});
      stream += take;
      if (take < len) break;
    }
    return pieces;
  }

  void fragment(const FileEntry& e, const std::vector<Piece>& pieces, std::vector<LocalPiece>& local,
                std::vector<Piece>* remote) {
    for (const auto& p : pieces) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> rest;
      for (const auto& x : e.portions.split(p.file_offset, p.length, &rest)) {
        local.push_back({x.phys_offset, x.length, p.stream_offset + (x.file_offset - p.file_offset)});
      }
      if (remote) {
        for (const auto& [o, l] : rest) remote->push_back({o, l, p.stream_offset + (o - p.file_offset)});
      }
    }
  }

  Message data_reply(const Message& req, MsgType type, std::int32_t status = 0) {
    Message m;
    m.type = type;
    m.cls = MsgClass::ack;
    m.sender = self;
    m.recipient = req.client;
    m.client = req.client;
    m.file = req.file;
    m.request = req.request;
    m.status = status;
    return m;
  }

  void ack_client(const Message& req, const AckParams& ap, Errc err = Errc::ok) {
    Message a = data_reply(req, MsgType::ack, -static_cast<std::int32_t>(err));
    a.params = proto::pack(ap);
    send_quietly(std::move(a));
  }

  static std::vector<std::uint8_t> gather(const StreamData& sd, const std::vector<Piece>& ps) {
    std::vector<std::uint8_t> out;
    for (const auto& p : ps) {
      auto s = sd.at(p.stream_offset, p.length);
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  }

  void dispatch_remote(const Message& m, FileEntry& e, const std::vector<Piece>& remote, std::uint64_t total,
                       bool separate, const StreamData* data) {
    if (remote.empty()) return;
    std::optional<layout::Layout> known;
    {
      std::lock_guard lk(e.known_mu);
      known = e.known;
    }
    Message sub;
    sub.type = m.type;
    sub.client = m.client;
    sub.request = m.request;
    sub.file = m.file;
    if (known) {
      std::map<NodeId, std::vector<Piece>> by_server;
      for (const auto& p : remote) {
        for (const auto& x : known->map(p.file_offset, p.length)) {
          by_server[x.server].push_back({x.file_offset, x.length, p.stream_offset + (x.file_offset - p.file_offset)});
        }
      }
      for (auto& [s, ps] : by_server) {
        if (s == self) throw Error(Errc::io_failure, "layout and portion table disagree");
        sub.cls = MsgClass::di;
        sub.recipient = s;
        sub.params = proto::pack(proto::SubRequestParams{total, static_cast<std::uint8_t>(separate), ps});
        sub.data = data ? gather(*data, ps) : std::vector<std::uint8_t>{};
        send(sub);
      }
    } else if (cfg.broadcast) {
      sub.cls = MsgClass::bi;
      sub.sender = self;
      sub.params = proto::pack(proto::SubRequestParams{total, static_cast<std::uint8_t>(separate), remote});
      sub.data = data ? gather(*data, remote) : std::vector<std::uint8_t>{};
      ep->broadcast(sub, others());
    } else {
      ack_client(m, {AckKind::plain, total, 0, segments_of(remote)}, Errc::unknown_file);
    }
  }

  void external_access(const Message& m) {
    auto e = entry(m.file);
    auto a = proto::unpack<proto::AccessParams>(m.params);
    const bool reading = m.type == MsgType::read;
    auto pieces = request_pieces(m, a, reading ? e->size.load() : std::numeric_limits<std::uint64_t>::max());
    std::uint64_t total = 0, end = 0;
    for (const auto& p : pieces) {
      total += p.length;
      end = std::max(end, p.file_offset + p.length);
    }
    if (total == 0) {
      ack_client(m, {AckKind::plain, 0, 0, {}});
      return;
    }
    std::vector<LocalPiece> local;
    std::vector<Piece> remote;
    if (reading) {
      const bool separate =
          proto::choose_transmission(a.length, cfg.inline_threshold) == proto::Transmission::separate_data;
      fragment(*e, pieces, local, &remote);
      dispatch_remote(m, *e, remote, total, separate, nullptr);
      serve_read(m, *e, local, total, separate);
      return;
    }
    const bool separate = m.data.empty();
    if (!separate && m.data.size() != total) throw Error(Errc::invalid_arguments, "inline data length mismatch");
    if (end > e->size.load()) extend_everywhere(*e, end);
    fragment(*e, pieces, local, &remote);
    StreamData sd(m.data);
    dispatch_remote(m, *e, remote, total, separate, separate ? nullptr : &sd);
    serve_write(m, *e, local, total, separate ? nullptr : &sd);
  }

  void extend_everywhere(FileEntry& e, std::uint64_t end) {
    Message bi;
    bi.type = MsgType::set_size;
    bi.file = e.id;
    bi.params = proto::pack(proto::SizeParams{proto::SizeMode::extend, end});
    broadcast_call(bi, others());
    auto cur = e.size.load();
    while (cur < end && !e.size.compare_exchange_weak(cur, end)) {
    }
  }

  void sub_access(const Message& m) {
    auto sub = proto::unpack<proto::SubRequestParams>(m.params);
    auto e = find_entry(m.file);
    if (!e) {
      if (m.cls == MsgClass::di) {
        ack_client(m, {AckKind::plain, sub.expected_total, 0, segments_of(sub.pieces)}, Errc::unknown_file);
      }
      return;
    }
    std::vector<LocalPiece> local;
    if (m.cls == MsgClass::di) {
      std::vector<Piece> stray;
      fragment(*e, sub.pieces, local, &stray);
      if (!stray.empty()) ack_client(m, {AckKind::plain, sub.expected_total, 0, segments_of(stray)}, Errc::unknown_file);
    } else {
      fragment(*e, sub.pieces, local, nullptr);
    }
    if (m.type == MsgType::read) {
      serve_read(m, *e, local, sub.expected_total, sub.separate_data != 0);
      return;
    }
    if (sub.separate_data) {
      serve_write(m, *e, local, sub.expected_total, nullptr);
    } else {
      StreamData sd(sub.pieces, m.data);
      serve_write(m, *e, local, sub.expected_total, &sd);
    }
  }

  // Sends the pieces to the client chunk by chunk, one buffer grant wide.
  void serve_read(const Message& req, FileEntry& e, const std::vector<LocalPiece>& ps, std::uint64_t total,
                  bool separate) {
    std::uint64_t mine = 0;
    for (const auto& p : ps) mine += p.length;
    if (mine == 0) return;
    BufferManager::Grant g(buffers, mine);
    std::shared_lock lk(e.rw);
    std::size_t i = 0;
    std::uint64_t pos = 0;
    while (i < ps.size()) {
      const auto i0 = i;
      const auto pos0 = pos;
      AckParams ap{AckKind::plain, total, static_cast<std::uint8_t>(separate), {}};
      std::vector<std::uint8_t> buf;
      try {
        buf.reserve(std::min(g.bytes(), mine));
        for (std::uint64_t room = g.bytes(); room > 0 && i < ps.size();) {
          auto take = std::min(room, ps[i].length - pos);
          auto at = buf.size();
          buf.resize(at + take);
          disk().read(self, e.id, ps[i].phys + pos, std::span(buf.data() + at, take));
          add_segment(ap.segments, ps[i].stream + pos, take);
          pos += take;
          room -= take;
          if (pos == ps[i].length) {
            ++i;
            pos = 0;
          }
        }
      } catch (const std::exception&) {
        AckParams err{AckKind::plain, total, 0, {}};
        for (auto k = i0; k < ps.size(); ++k) {
          auto skip = k == i0 ? pos0 : 0;
          add_segment(err.segments, ps[k].stream + skip, ps[k].length - skip);
        }
        ack_client(req, err, Errc::io_failure);
        return;
      }
      Message ack = data_reply(req, MsgType::ack);
      ack.params = proto::pack(ap);
      if (separate) {
        send(std::move(ack));
        Message d = data_reply(req, MsgType::data);
        d.data = std::move(buf);
        send(std::move(d));
      } else {
        ack.data = std::move(buf);
        send(std::move(ack));
      }
    }
  }

  // Inline data is written at once; otherwise the client is asked for each
  // chunk with a READY acknowledge and answers with a DATA message.
  void serve_write(const Message& req, FileEntry& e, const std::vector<LocalPiece>& ps, std::uint64_t total,
                   const StreamData* data) {
    std::uint64_t mine = 0;
    for (const auto& p : ps) mine += p.length;
    if (mine == 0) return;
    AckParams done{data ? AckKind::plain : AckKind::done, total, 0, segments_of(ps)};
    try {
      if (data) {
        std::unique_lock lk(e.rw);
        for (const auto& p : ps) disk().write(self, e.id, p.phys, data->at(p.stream, p.length));
      } else {
        Route route(*this, req.client, req.request);
        BufferManager::Grant g(buffers, mine);
        std::unique_lock lk(e.rw);
        std::size_t i = 0;
        std::uint64_t pos = 0;
        while (i < ps.size()) {
          std::vector<LocalPiece> chunk;
          AckParams ready{AckKind::ready, total, 0, {}};
          std::uint64_t bytes = 0;
          for (std::uint64_t room = g.bytes(); room > 0 && i < ps.size();) {
            auto take = std::min(room, ps[i].length - pos);
            chunk.push_back({ps[i].phys + pos, take, ps[i].stream + pos});
            add_segment(ready.segments, ps[i].stream + pos, take);
            bytes += take;
            pos += take;
            room -= take;
            if (pos == ps[i].length) {
              ++i;
              pos = 0;
            }
          }
          Message r = data_reply(req, MsgType::ack);
          r.params = proto::pack(ready);
          send(std::move(r));
          Message d = route.next();
          if (d.type != MsgType::data || !d.ok()) throw Error(Errc::refused, "client abandoned the write");
          if (d.data.size() != bytes) throw Error(Errc::invalid_arguments, "DATA length does not match READY");
          std::uint64_t at = 0;
          for (const auto& c : chunk) {
            disk().write(self, e.id, c.phys, std::span(d.data.data() + at, c.length));
            at += c.length;
          }
        }
      }
    } catch (const Error& err) {
      ack_client(req, done, err.code());
      return;
    } catch (const std::exception&) {
      ack_client(req, done, Errc::io_failure);
      return;
    }
    ack_client(req, done);
  }
};

Server::Server(config::ClusterConfig cfg, NodeId id, std::shared_ptr<net::Endpoint> ep)
    : impl_(std::make_unique<Impl>(std::move(cfg), id, std::move(ep))) {}

Server::~Server() { stop(); }

void Server::start() {
  if (impl_->dispatcher.joinable()) return;
  impl_->dispatcher = std::thread([this] { impl_->dispatch_loop(); });
}

void Server::drain() {
  impl_->draining = true;
  impl_->wait_external(0);
}

void Server::stop() {
  if (impl_->dispatcher.joinable()) {
    drain();
    impl_->wait_all(0);
    impl_->stop_flag = true;
    impl_->dispatcher.join();
  }
  impl_->wait_all(0);
}

void Server::wait() {
  std::unique_lock lk(impl_->act_mu);
  impl_->act_cv.wait(lk, [&] { return impl_->stopped; });
}

bool Server::running() const {
  std::lock_guard lk(impl_->act_mu);
  return impl_->dispatcher.joinable() && !impl_->stopped;
}

NodeId Server::id() const { return impl_->self; }

BufferManager& Server::buffers() { return impl_->buffers; }

Disk& Server::disk(std::size_t index) { return *impl_->disks.at(index); }

Cluster::Cluster(config::ClusterConfig cfg, net::Network& network) : cfg_(std::move(cfg)) {
  for (const auto& s : cfg_.servers) {
    servers_.push_back(std::make_unique<Server>(cfg_, s.id, network.attach(s.id)));
  }
  for (auto& s : servers_) s->start();
}

Cluster::~Cluster() { stop(); }

void Cluster::stop() {
  for (auto& s : servers_) s->drain();
  for (auto& s : servers_) s->stop();
}

Server& Cluster::server(NodeId id) {
  for (auto& s : servers_) {
    if (s->id() == id) return *s;
  }
  throw Error(Errc::invalid_arguments, "no server " + std::to_string(id));
}

}  // namespace vipio::server
