#include "vipio/client.hpp"

#include <cstring>
#include <iomanip>
#include <sstream>

namespace vipio::client {

using proto::AckKind;
using proto::AckParams;
using proto::Message;
using proto::MsgClass;
using proto::MsgType;

namespace {

constexpr auto kPoll = std::chrono::milliseconds(20);

bool contiguous_type(const dt::Datatype& t) { return t.is_base() || view::build_descriptor(t).contiguous; }

void check_count(std::int64_t count) {
  if (count < 0) throw Error(Errc::invalid_arguments, "negative count");
}

}  // namespace

struct Session::AsyncOp {
  std::mutex mu;
  std::condition_variable cv;
  bool done = false;
  IoStatus status;
  std::exception_ptr error;
};

class Session::Route {
 public:
  explicit Route(Session& s) : s_(s), id_(s.next_request_++) {
    if (id_ == 0) id_ = s.next_request_++;
    box_ = std::make_shared<net::Mailbox>();
    std::lock_guard lk(s_.route_mu_);
    s_.routes_[id_] = box_;
  }
  ~Route() {
    std::lock_guard lk(s_.route_mu_);
    s_.routes_.erase(id_);
  }
  std::uint32_t id() const { return id_; }
  Message next() {
    auto m = box_->pop(s_.opts_.timeout);
    if (!m) {
      if (box_->closed()) throw Error(Errc::not_connected, "session disconnected");
      throw Error(Errc::timeout, "no reply from servers");
    }
    return std::move(*m);
  }

 private:
  Session& s_;
  std::uint32_t id_;
  std::shared_ptr<net::Mailbox> box_;
};

Session::Session(net::Network& network, config::ClusterConfig cfg) : Session(network, std::move(cfg), Options{}) {}

Session::Session(net::Network& network, config::ClusterConfig cfg, Options opts)
    : network_(network), cfg_(std::move(cfg)), opts_(opts), id_(network.allocate_client_id()) {
  ep_ = network_.attach(id_);
  receiver_ = std::thread([this] { receive_loop(); });
  executor_ = std::thread([this] { executor_loop(); });
}

Session::~Session() {
  if (connected_) {
    try {
      disconnect();
    } catch (const std::exception&) {
    }
  }
  {
    std::lock_guard lk(exec_mu_);
    exec_stop_ = true;
  }
  exec_cv_.notify_all();
  executor_.join();
  closing_ = true;
  receiver_.join();
  ep_->close();
}

void Session::receive_loop() {
  while (!closing_) {
    auto m = ep_->receive(kPoll);
    if (!m) continue;
    {
      std::lock_guard lk(count_mu_);
      if (m->type == MsgType::ack) ++counters_.acks;
      if (m->type == MsgType::data) ++counters_.datas;
      counters_.bytes += m->data.size();
    }
    std::shared_ptr<net::Mailbox> box;
    {
      std::lock_guard lk(route_mu_);
      auto it = routes_.find(m->request);
      if (it != routes_.end()) box = it->second;
    }
    if (box) box->push(std::move(*m));
  }
}

void Session::executor_loop() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lk(exec_mu_);
      exec_cv_.wait(lk, [&] { return exec_stop_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
    }
    job();
  }
}

Message Session::make(MsgType type, std::uint32_t file) const {
  Message m;
  m.type = type;
  m.cls = MsgClass::er;
  m.sender = id_;
  m.recipient = buddy_;
  m.client = id_;
  m.file = file;
  return m;
}

Message Session::rpc(NodeId to, Message m) {
  Route r(*this);
  m.recipient = to;
  m.request = r.id();
  ep_->send(m);
  auto rep = r.next();
  if (!rep.ok()) throw Error(rep.error(), std::string(proto::type_name(m.type)) + " failed");
  return rep;
}

void Session::require_connected() const {
  if (!connected_) throw Error(Errc::not_connected);
}

NodeId Session::buddy() const {
  require_connected();
  return buddy_;
}

void Session::connect(int system_id) {
  if (connected_) throw Error(Errc::invalid_arguments, "already connected");
  if (system_id != 0) throw Error(Errc::no_controller, "unknown system " + std::to_string(system_id));
  NodeId cc = 0;
  try {
    cc = cfg_.connection_controller();
  } catch (const Error&) {
    throw Error(Errc::no_controller);
  }
  Message m = make(MsgType::connect);
  if (opts_.preferred_buddy) {
    ByteWriter w;
    w.u32(*opts_.preferred_buddy);
    m.params = w.take();
  }
  Message rep;
  try {
    rep = rpc(cc, m);
  } catch (const Error& e) {
    if (e.code() == Errc::io_failure || e.code() == Errc::timeout) throw Error(Errc::no_controller, e.what());
    throw Error(Errc::refused, e.what());
  }
  ByteReader r(rep.params);
  buddy_ = r.u32();
  connected_ = true;
}

void Session::disconnect() {
  require_connected();
  connected_ = false;
  {
    std::lock_guard lk(route_mu_);
    for (auto& [id, box] : routes_) box->close();
  }
  rpc(cfg_.connection_controller(), make(MsgType::disconnect));
}

FileState& Session::state(Handle h) { return table_.at(h); }

Handle Session::open(const std::string& name, std::uint32_t flags, const layout::FileHint* hint) {
  require_connected();
  mode::check(flags);
  Message m = make(MsgType::open);
  m.params = proto::pack(proto::OpenParams{flags, name, hint ? hint->serialize() : std::vector<std::uint8_t>{}});
  auto rep = proto::unpack<proto::OpenReply>(rpc(buddy_, m).params);
  FileState f;
  f.file_id = rep.file_id;
  f.name = name;
  f.flags = flags;
  if (flags & mode::append) f.position = rep.size;
  std::lock_guard lk(mu_);
  return table_.insert(std::move(f));
}

void Session::close(Handle h) {
  require_connected();
  FileState f;
  {
    std::lock_guard lk(mu_);
    f = state(h);
  }
  Message m = make(MsgType::close, f.file_id);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(h));
  m.params = w.take();
  rpc(buddy_, m);
  {
    std::lock_guard lk(mu_);
    table_.erase(h);
  }
  if (f.flags & mode::delete_on_close) remove(f.name);
}

void Session::remove(const std::string& name) {
  require_connected();
  Message m = make(MsgType::remove);
  ByteWriter w;
  w.str(name);
  m.params = w.take();
  rpc(buddy_, m);
}

void Session::set_size(Handle h, std::uint64_t size) {
  require_connected();
  std::uint32_t file = 0;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    if (f.flags & mode::rdonly) throw Error(Errc::not_writable);
    file = f.file_id;
  }
  Message m = make(MsgType::set_size, file);
  m.params = proto::pack(proto::SizeParams{proto::SizeMode::set, size});
  rpc(buddy_, m);
}

void Session::preallocate(Handle h, std::uint64_t size) {
  require_connected();
  std::uint32_t file = 0;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    if (f.flags & mode::rdonly) throw Error(Errc::not_writable);
    file = f.file_id;
  }
  Message m = make(MsgType::set_size, file);
  m.params = proto::pack(proto::SizeParams{proto::SizeMode::extend, size});
  rpc(buddy_, m);
}

std::uint64_t Session::get_size(Handle h) {
  require_connected();
  std::uint32_t file = 0;
  {
    std::lock_guard lk(mu_);
    file = state(h).file_id;
  }
  return proto::unpack<proto::SizeParams>(rpc(buddy_, make(MsgType::get_size, file)).params).size;
}

void Session::set_view(Handle h, std::int64_t disp, dt::BaseType etype, const dt::Datatype& filetype,
                       const std::string& datarep) {
  require_connected();
  if (datarep != "native") throw Error(Errc::unsupported_representation, datarep);
  if (disp < 0) throw Error(Errc::invalid_arguments, "negative displacement");
  auto built = view::build_descriptor(filetype, etype);
  install_view(h, disp, etype, std::move(built.desc), built.contiguous);
}

void Session::set_view(Handle h, std::int64_t disp, dt::BaseType etype, view::AccessDesc desc) {
  require_connected();
  if (disp < 0) throw Error(Errc::invalid_arguments, "negative displacement");
  const bool contiguous = desc.total_actual == desc.total_extent;
  install_view(h, disp, etype, std::move(desc), contiguous);
}

void Session::install_view(Handle h, std::int64_t disp, dt::BaseType etype, view::AccessDesc desc, bool contiguous) {
  if (desc.total_actual <= 0) throw Error(Errc::invalid_arguments, "filetype has no accessible bytes");
  std::uint32_t file = 0;
  {
    std::lock_guard lk(mu_);
    file = state(h).file_id;
  }
  Message m = make(MsgType::set_view, file);
  m.params = proto::pack(proto::SetViewParams{static_cast<std::uint32_t>(h), static_cast<std::uint64_t>(disp),
                                              static_cast<std::uint8_t>(etype.kind), view::serialize(desc)});
  rpc(buddy_, m);
  std::lock_guard lk(mu_);
  auto& f = state(h);
  f.view = ViewInfo{disp, etype, std::move(desc), contiguous, true};
  f.position = 0;
}

void Session::set_view_all(Handle h, std::int64_t disp, dt::BaseType etype, const dt::Datatype& filetype,
                           const std::string& group, std::uint32_t members) {
  barrier(group, members, static_cast<std::uint8_t>(etype.kind));
  set_view(h, disp, etype, filetype);
}

const ViewInfo& Session::view(Handle h) {
  std::lock_guard lk(mu_);
  return state(h).view;
}

// ---------------------------------------------------------------- transfer

std::uint64_t Session::transfer_read(std::uint32_t file, Handle h, std::uint64_t offset, std::uint64_t length,
                                     bool use_view, bool explicit_at, std::uint8_t* out) {
  Route r(*this);
  Message m = make(MsgType::read, file);
  m.request = r.id();
  m.params = proto::pack(proto::AccessParams{static_cast<std::uint32_t>(h), offset, length,
                                             static_cast<std::uint8_t>(use_view), static_cast<std::uint8_t>(explicit_at)});
  ep_->send(m);

  std::map<NodeId, std::deque<AckParams>> awaiting_data;
  std::size_t awaiting = 0;
  std::optional<std::uint64_t> expected;
  std::uint64_t covered = 0;
  Errc err = Errc::ok;
  auto place = [&](const AckParams& ap, const std::vector<std::uint8_t>& data) {
    if (data.size() != ap.covered()) throw Error(Errc::io_failure, "chunk size does not match its segments");
    std::uint64_t at = 0;
    for (const auto& s : ap.segments) {
      if (s.stream_offset + s.length > length) throw Error(Errc::io_failure, "segment outside the request");
      std::memcpy(out + s.stream_offset, data.data() + at, s.length);
      at += s.length;
    }
    covered += ap.covered();
  };
  while (!expected || covered < *expected || awaiting > 0) {
    Message rep = r.next();
    if (rep.type == MsgType::data) {
      auto& q = awaiting_data[rep.sender];
      if (q.empty()) throw Error(Errc::io_failure, "DATA without a preceding ACK");
      place(q.front(), rep.data);
      q.pop_front();
      --awaiting;
      continue;
    }
    if (!rep.ok() && rep.params.empty()) throw Error(rep.error(), "read failed");
    auto ap = proto::unpack<AckParams>(rep.params);
    expected = ap.expected_total;
    if (!rep.ok()) {
      err = rep.error();
      covered += ap.covered();
    } else if (ap.data_follows) {
      awaiting_data[rep.sender].push_back(std::move(ap));
      ++awaiting;
    } else {
      place(ap, rep.data);
    }
  }
  if (err != Errc::ok) throw Error(err, "read failed");
  return *expected;
}

std::uint64_t Session::transfer_write(std::uint32_t file, Handle h, std::uint64_t offset, std::uint64_t length,
                                      bool use_view, bool explicit_at, const std::uint8_t* in) {
  Route r(*this);
  Message m = make(MsgType::write, file);
  m.request = r.id();
  m.params = proto::pack(proto::AccessParams{static_cast<std::uint32_t>(h), offset, length,
                                             static_cast<std::uint8_t>(use_view), static_cast<std::uint8_t>(explicit_at)});
  if (proto::choose_transmission(length, cfg_.inline_threshold) == proto::Transmission::inline_data) {
    m.data.assign(in, in + length);
  }
  ep_->send(m);

  std::optional<std::uint64_t> expected;
  std::uint64_t covered = 0;
  Errc err = Errc::ok;
  while (!expected || covered < *expected) {
    Message rep = r.next();
    if (!rep.ok() && rep.params.empty()) throw Error(rep.error(), "write failed");
    if (rep.type != MsgType::ack) throw Error(Errc::io_failure, "unexpected message during write");
    auto ap = proto::unpack<AckParams>(rep.params);
    expected = ap.expected_total;
    if (!rep.ok()) {
      err = rep.error();
      covered += ap.covered();
      continue;
    }
    if (ap.kind == AckKind::ready) {
      Message d;
      d.type = MsgType::data;
      d.cls = MsgClass::ack;
      d.recipient = rep.sender;
      d.client = id_;
      d.file = file;
      d.request = r.id();
      for (const auto& s : ap.segments) {
        if (s.stream_offset + s.length > length) throw Error(Errc::io_failure, "READY outside the request");
        d.data.insert(d.data.end(), in + s.stream_offset, in + s.stream_offset + s.length);
      }
      ep_->send(std::move(d));
      continue;
    }
    covered += ap.covered();
  }
  if (err != Errc::ok) throw Error(err, "write failed");
  return length;
}

Session::Plan Session::plan(Handle h, std::uint64_t view_offset, std::int64_t count, const dt::Datatype& memtype,
                            bool reading) {
  check_count(count);
  auto& f = state(h);
  if (reading && (f.flags & mode::wronly)) throw Error(Errc::not_readable);
  if (!reading && (f.flags & mode::rdonly)) throw Error(Errc::not_writable);
  Plan p;
  p.file = f.file_id;
  p.bytes = static_cast<std::uint64_t>(count) * static_cast<std::uint64_t>(memtype.size());
  view::byte_to_etype(static_cast<std::int64_t>(p.bytes), f.view.etype);
  if (f.view.is_set && !f.view.contiguous) {
    p.use_view = true;
    p.offset = view_offset;
  } else {
    p.offset = static_cast<std::uint64_t>(f.view.disp) + view_offset;
  }
  return p;
}

IoStatus Session::do_read(Handle h, const Plan& p, void* buf, std::int64_t, const dt::Datatype& memtype,
                          bool explicit_at) {
  auto* out = static_cast<std::uint8_t*>(buf);
  if (contiguous_type(memtype)) {
    auto n = transfer_read(p.file, h, p.offset, p.bytes, p.use_view, explicit_at, out);
    return {h, n};
  }
  std::vector<std::uint8_t> stream(p.bytes);
  auto n = transfer_read(p.file, h, p.offset, p.bytes, p.use_view, explicit_at, stream.data());
  if (n > 0) {
    auto mem = view::build_descriptor(memtype).desc;
    std::uint64_t at = 0;
    for (const auto& run : view::enumerate_runs(mem, 0, 0, static_cast<std::int64_t>(n))) {
      std::memcpy(out + run.file_offset, stream.data() + at, static_cast<std::size_t>(run.length));
      at += static_cast<std::uint64_t>(run.length);
    }
  }
  return {h, n};
}

IoStatus Session::do_write(Handle h, const Plan& p, const void* buf, std::int64_t, const dt::Datatype& memtype,
                           bool explicit_at) {
  const auto* in = static_cast<const std::uint8_t*>(buf);
  if (contiguous_type(memtype)) {
    return {h, transfer_write(p.file, h, p.offset, p.bytes, p.use_view, explicit_at, in)};
  }
  std::vector<std::uint8_t> stream;
  stream.reserve(p.bytes);
  if (p.bytes > 0) {
    auto mem = view::build_descriptor(memtype).desc;
    for (const auto& run : view::enumerate_runs(mem, 0, 0, static_cast<std::int64_t>(p.bytes))) {
      stream.insert(stream.end(), in + run.file_offset, in + run.file_offset + run.length);
    }
  }
  return {h, transfer_write(p.file, h, p.offset, p.bytes, p.use_view, explicit_at, stream.data())};
}

IoStatus Session::read(Handle h, void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return read(h, buf, count, et);
}

IoStatus Session::read(Handle h, void* buf, std::int64_t count, const dt::Datatype& memtype) {
  require_connected();
  Plan p;
  {
    std::lock_guard lk(mu_);
    p = plan(h, state(h).position, count, memtype, true);
  }
  auto st = do_read(h, p, buf, count, memtype, false);
  std::lock_guard lk(mu_);
  auto& f = state(h);
  f.position += st.bytes;
  f.accessed = true;
  return st;
}

IoStatus Session::write(Handle h, const void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return write(h, buf, count, et);
}

IoStatus Session::write(Handle h, const void* buf, std::int64_t count, const dt::Datatype& memtype) {
  require_connected();
  Plan p;
  {
    std::lock_guard lk(mu_);
    p = plan(h, state(h).position, count, memtype, false);
  }
  auto st = do_write(h, p, buf, count, memtype, false);
  std::lock_guard lk(mu_);
  auto& f = state(h);
  f.position += st.bytes;
  f.accessed = true;
  return st;
}

IoStatus Session::read_at(Handle h, std::int64_t offset, void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return read_at(h, offset, buf, count, et);
}

IoStatus Session::read_at(Handle h, std::int64_t offset, void* buf, std::int64_t count, const dt::Datatype& memtype) {
  require_connected();
  if (offset < 0) throw Error(Errc::invalid_arguments, "negative offset");
  Plan p;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    p = plan(h, static_cast<std::uint64_t>(view::etype_to_byte(offset, f.view.etype)), count, memtype, true);
  }
  return do_read(h, p, buf, count, memtype, true);
}

IoStatus Session::write_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return write_at(h, offset, buf, count, et);
}

IoStatus Session::write_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count,
                           const dt::Datatype& memtype) {
  require_connected();
  if (offset < 0) throw Error(Errc::invalid_arguments, "negative offset");
  Plan p;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    p = plan(h, static_cast<std::uint64_t>(view::etype_to_byte(offset, f.view.etype)), count, memtype, false);
  }
  return do_write(h, p, buf, count, memtype, true);
}

// ---------------------------------------------------------------- async

IoRequest Session::submit(Handle h, std::function<IoStatus()> job) {
  auto op = std::make_shared<AsyncOp>();
  IoRequest req;
  {
    std::lock_guard lk(exec_mu_);
    req.id = next_async_++;
    req.file_ref = h;
    async_[req.id] = op;
    jobs_.push_back([op, job = std::move(job)] {
      IoStatus st;
      std::exception_ptr err;
      try {
        st = job();
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard lk(op->mu);
      op->status = st;
      op->error = err;
      op->done = true;
      op->cv.notify_all();
    });
  }
  exec_cv_.notify_all();
  return req;
}

IoRequest Session::iread(Handle h, void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return iread(h, buf, count, et);
}

IoRequest Session::iread(Handle h, void* buf, std::int64_t count, const dt::Datatype& memtype) {
  require_connected();
  Plan p;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    p = plan(h, f.position, count, memtype, true);
    f.position += p.bytes;
    f.accessed = true;
  }
  return submit(h, [this, h, p, buf, count, memtype] { return do_read(h, p, buf, count, memtype, false); });
}

IoRequest Session::iwrite(Handle h, const void* buf, std::int64_t count) {
  dt::BaseType et;
  {
    std::lock_guard lk(mu_);
    et = state(h).view.etype;
  }
  return iwrite(h, buf, count, et);
}

IoRequest Session::iwrite(Handle h, const void* buf, std::int64_t count, const dt::Datatype& memtype) {
  require_connected();
  Plan p;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    p = plan(h, f.position, count, memtype, false);
    f.position += p.bytes;
    f.accessed = true;
  }
  return submit(h, [this, h, p, buf, count, memtype] { return do_write(h, p, buf, count, memtype, false); });
}

IoRequest Session::iread_at(Handle h, std::int64_t offset, void* buf, std::int64_t count) {
  require_connected();
  if (offset < 0) throw Error(Errc::invalid_arguments, "negative offset");
  Plan p;
  dt::Datatype memtype = dt::kByte;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    memtype = f.view.etype;
    p = plan(h, static_cast<std::uint64_t>(view::etype_to_byte(offset, f.view.etype)), count, memtype, true);
  }
  return submit(h, [this, h, p, buf, count, memtype] { return do_read(h, p, buf, count, memtype, true); });
}

IoRequest Session::iwrite_at(Handle h, std::int64_t offset, const void* buf, std::int64_t count) {
  require_connected();
  if (offset < 0) throw Error(Errc::invalid_arguments, "negative offset");
  Plan p;
  dt::Datatype memtype = dt::kByte;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    memtype = f.view.etype;
    p = plan(h, static_cast<std::uint64_t>(view::etype_to_byte(offset, f.view.etype)), count, memtype, false);
  }
  return submit(h, [this, h, p, buf, count, memtype] { return do_write(h, p, buf, count, memtype, true); });
}

bool Session::test(IoRequest& req, IoStatus& status) {
  std::shared_ptr<AsyncOp> op;
  {
    std::lock_guard lk(exec_mu_);
    auto it = async_.find(req.id);
    if (it == async_.end()) throw Error(Errc::unknown_request, "request " + std::to_string(req.id));
    op = it->second;
  }
  {
    std::lock_guard lk(op->mu);
    if (!op->done) {
      status = IoStatus{-1, 0};
      return false;
    }
  }
  status = wait(req);
  return true;
}

IoStatus Session::wait(IoRequest& req) {
  std::shared_ptr<AsyncOp> op;
  {
    std::lock_guard lk(exec_mu_);
    auto it = async_.find(req.id);
    if (it == async_.end()) throw Error(Errc::unknown_request, "request " + std::to_string(req.id));
    op = it->second;
  }
  std::unique_lock lk(op->mu);
  op->cv.wait(lk, [&] { return op->done; });
  {
    std::lock_guard elk(exec_mu_);
    async_.erase(req.id);
  }
  if (op->error) std::rethrow_exception(op->error);
  return op->status;
}

// ---------------------------------------------------------------- pointers

std::uint64_t Session::view_length(Handle h) {
  const auto size = static_cast<std::int64_t>(get_size(h));
  std::lock_guard lk(mu_);
  const auto& v = state(h).view;
  const auto avail = size - v.disp;
  if (avail <= 0) return 0;
  if (!v.is_set || v.contiguous) return static_cast<std::uint64_t>(avail);
  const auto periods = avail / v.desc.total_extent;
  const auto rem = avail % v.desc.total_extent;
  std::int64_t n = periods * v.desc.total_actual;
  for (const auto& r : view::enumerate_runs(v.desc, 0, 0, v.desc.total_actual)) {
    n += std::clamp<std::int64_t>(rem - r.file_offset, 0, r.length);
  }
  return static_cast<std::uint64_t>(n);
}

std::int64_t Session::seek(Handle h, std::int64_t offset, Whence whence) {
  require_connected();
  dt::BaseType et;
  std::int64_t base = 0;
  {
    std::lock_guard lk(mu_);
    auto& f = state(h);
    et = f.view.etype;
    if (whence == Whence::cur) base = static_cast<std::int64_t>(f.position);
  }
  if (whence == Whence::end) base = static_cast<std::int64_t>(view_length(h));
  const auto target = base + view::etype_to_byte(offset, et);
  if (target < 0) throw Error(Errc::invalid_arguments, "seek before the start of the view");
  std::lock_guard lk(mu_);
  auto& f = state(h);
  f.position = static_cast<std::uint64_t>(target);
  return view::byte_to_etype(target, et);
}

std::int64_t Session::seek(Handle h, std::int64_t offset, int whence) {
  if (whence < 0 || whence > 2) throw Error(Errc::bad_whence, std::to_string(whence));
  return seek(h, offset, static_cast<Whence>(whence));
}

std::int64_t Session::get_position(Handle h) {
  std::lock_guard lk(mu_);
  auto& f = state(h);
  return view::byte_to_etype(static_cast<std::int64_t>(f.position), f.view.etype);
}

std::int64_t Session::get_byte_offset(Handle h, std::int64_t offset) {
  std::lock_guard lk(mu_);
  auto& f = state(h);
  if (offset < 0) throw Error(Errc::invalid_arguments, "negative offset");
  const auto bytes = view::etype_to_byte(offset, f.view.etype);
  if (!f.view.is_set || f.view.contiguous) return f.view.disp + bytes;
  return f.view.disp + view::absolute_offset(f.view.desc, bytes);
}

void Session::set_atomicity(Handle h, bool atomic) {
  std::lock_guard lk(mu_);
  state(h);
  if (!atomic) throw Error(Errc::unsupported, "only atomic mode is available");
}

bool Session::get_atomicity(Handle h) {
  std::lock_guard lk(mu_);
  state(h);
  return true;
}

void Session::sync(Handle h) {
  require_connected();
  std::uint32_t file = 0;
  {
    std::lock_guard lk(mu_);
    file = state(h).file_id;
  }
  Message m = make(MsgType::admin, file);
  m.params = {static_cast<std::uint8_t>(proto::AdminOp::sync)};
  rpc(buddy_, m);
}

std::int64_t Session::get_count(const IoStatus& status, const dt::Datatype& type) {
  if (status.file_ref < 0) throw Error(Errc::unfinished_request);
  const auto size = type.size();
  if (size <= 0) throw Error(Errc::invalid_arguments, "type has no bytes");
  if (static_cast<std::int64_t>(status.bytes) % size != 0) throw Error(Errc::not_aligned);
  return static_cast<std::int64_t>(status.bytes) / size;
}

// ---------------------------------------------------------------- services

void Session::barrier(const std::string& group, std::uint32_t members, std::uint8_t tag) {
  require_connected();
  Message m = make(MsgType::admin);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(proto::AdminOp::barrier));
  w.str(group);
  w.u32(members);
  w.u8(tag);
  m.params = w.take();
  rpc(cfg_.connection_controller(), m);
}

void Session::hint_prefetch(const std::vector<std::string>& names) {
  require_connected();
  Message m = make(MsgType::hint);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(proto::HintKind::prefetch));
  w.u32(static_cast<std::uint32_t>(names.size()));
  for (const auto& n : names) w.str(n);
  m.params = w.take();
  rpc(buddy_, m);
}

void Session::hint_administration(NodeId server, std::uint32_t disk, double latency_ms_per_mib) {
  require_connected();
  if (latency_ms_per_mib < 0) throw Error(Errc::invalid_arguments, "negative latency");
  Message m = make(MsgType::hint);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(proto::HintKind::administration));
  w.u32(server);
  w.u32(disk);
  w.u64(static_cast<std::uint64_t>(latency_ms_per_mib * 1000.0 + 0.5));
  m.params = w.take();
  rpc(buddy_, m);
}

std::string Session::inspect(const std::string& name) {
  require_connected();
  Message m = make(MsgType::admin);
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(proto::AdminOp::inspect));
  w.str(name);
  m.params = w.take();
  auto rep = rpc(cfg_.system_controller(), m);
  ByteReader r(rep.params);
  return r.str();
}

void Session::shutdown_cluster() {
  require_connected();
  rpc(cfg_.system_controller(), make(MsgType::shutdown));
  connected_ = false;
}

Counters Session::counters() const {
  std::lock_guard lk(count_mu_);
  return counters_;
}

void Session::reset_counters() {
  std::lock_guard lk(count_mu_);
  counters_ = {};
}

std::size_t Session::open_files() {
  std::lock_guard lk(mu_);
  return table_.open_count();
}

std::size_t Session::table_capacity() {
  std::lock_guard lk(mu_);
  return table_.capacity();
}

// ---------------------------------------------------------------- scripts

std::uint32_t parse_flags(const std::string& text) {
  static const std::map<std::string, std::uint32_t> names = {
      {"rdonly", mode::rdonly},       {"wronly", mode::wronly},
      {"rdwr", mode::rdwr},           {"create", mode::create},
      {"excl", mode::excl},           {"delete_on_close", mode::delete_on_close},
      {"unique_open", mode::unique_open}, {"sequential", mode::sequential},
      {"append", mode::append}};
  std::uint32_t flags = 0;
  std::istringstream in(text);
  for (std::string f; std::getline(in, f, ',');) {
    auto it = names.find(f);
    if (it == names.end()) throw Error(Errc::invalid_arguments, "unknown flag " + f);
    flags |= it->second;
  }
  return flags;
}

std::vector<std::uint8_t> pattern_bytes(std::uint64_t seed, std::uint64_t n) {
  std::vector<std::uint8_t> b(n);
  for (std::uint64_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(seed * 131 + i * 7);
  return b;
}

namespace {

std::string fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

Whence parse_whence(const std::string& w) {
  if (w == "set") return Whence::set;
  if (w == "cur") return Whence::cur;
  if (w == "end") return Whence::end;
  throw Error(Errc::bad_whence, w);
}

}  // namespace

int run_script(Session& s, std::istream& in, std::ostream& out) {
  int failures = 0;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ls(line);
    std::string op;
    if (!(ls >> op)) continue;
    try {
      auto need = [&](auto& v) {
        if (!(ls >> v)) throw Error(Errc::invalid_arguments, "missing argument");
      };
      Handle h = 0;
      if (op == "open") {
        std::string name, flags;
        need(name);
        need(flags);
        out << "open " << s.open(name, parse_flags(flags)) << "\n";
      } else if (op == "close") {
        need(h);
        s.close(h);
        out << "close ok\n";
      } else if (op == "remove") {
        std::string name;
        need(name);
        s.remove(name);
        out << "remove ok\n";
      } else if (op == "view") {
        std::int64_t disp = 0;
        std::string etype, filetype;
        need(h);
        need(disp);
        need(etype);
        std::getline(ls >> std::ws, filetype);
        auto et = dt::BaseType::from_name(etype);
        if (!et) throw Error(Errc::invalid_arguments, "unknown etype " + etype);
        s.set_view(h, disp, *et, dt::parse_datatype(filetype));
        out << "view ok\n";
      } else if (op == "write" || op == "writeat") {
        std::int64_t offset = 0, count = 0;
        std::uint64_t seed = 0;
        need(h);
        if (op == "writeat") need(offset);
        need(count);
        need(seed);
        const auto& v = s.view(h);
        auto data = pattern_bytes(seed, static_cast<std::uint64_t>(count * v.etype.extent()));
        auto st = op == "write" ? s.write(h, data.data(), count) : s.write_at(h, offset, data.data(), count);
        out << op << " " << st.bytes << "\n";
      } else if (op == "read" || op == "readat") {
        std::int64_t offset = 0, count = 0;
        need(h);
        if (op == "readat") need(offset);
        need(count);
        const auto& v = s.view(h);
        std::vector<std::uint8_t> buf(static_cast<std::size_t>(count * v.etype.extent()));
        auto st = op == "read" ? s.read(h, buf.data(), count) : s.read_at(h, offset, buf.data(), count);
        out << op << " " << st.bytes << " " << fnv1a(buf.data(), st.bytes) << "\n";
      } else if (op == "seek") {
        std::int64_t offset = 0;
        std::string whence;
        need(h);
        need(offset);
        need(whence);
        out << "seek " << s.seek(h, offset, parse_whence(whence)) << "\n";
      } else if (op == "setsize") {
        std::uint64_t n = 0;
        need(h);
        need(n);
        s.set_size(h, n);
        out << "setsize ok\n";
      } else if (op == "size") {
        need(h);
        out << "size " << s.get_size(h) << "\n";
      } else if (op == "sync") {
        need(h);
        s.sync(h);
        out << "sync ok\n";
      } else {
        throw Error(Errc::invalid_arguments, "unknown command " + op);
      }
    } catch (const Error& e) {
      ++failures;
      out << "error line " << lineno << ": " << e.what() << "\n";
    }
  }
  return failures;
}

}  // namespace vipio::client
