#include "vipio/protocol.hpp"

#include <algorithm>
#include <limits>

namespace vipio::mode {

void check(std::uint32_t flags) {
  const int access = ((flags & rdonly) != 0) + ((flags & wronly) != 0) + ((flags & rdwr) != 0);
  if (access != 1) throw Error(Errc::mode_conflict, "exactly one of RDONLY, WRONLY, RDWR required");
  if ((flags & rdonly) && (flags & (create | excl))) throw Error(Errc::mode_conflict, "RDONLY with CREATE or EXCL");
  if ((flags & rdwr) && (flags & sequential)) throw Error(Errc::mode_conflict, "RDWR with SEQUENTIAL");
  if (flags >= (append << 1)) throw Error(Errc::mode_conflict, "unknown mode bits");
}

}  // namespace vipio::mode

namespace vipio::proto {

const char* type_name(MsgType t) {
  switch (t) {
    case MsgType::connect: return "CONNECT";
    case MsgType::disconnect: return "DISCONNECT";
    case MsgType::open: return "OPEN";
    case MsgType::close: return "CLOSE";
    case MsgType::read: return "READ";
    case MsgType::write: return "WRITE";
    case MsgType::seek: return "SEEK";
    case MsgType::remove: return "REMOVE";
    case MsgType::set_size: return "SET_SIZE";
    case MsgType::get_size: return "GET_SIZE";
    case MsgType::set_view: return "SET_VIEW";
    case MsgType::hint: return "HINT";
    case MsgType::admin: return "ADMIN";
    case MsgType::shutdown: return "SHUTDOWN";
    case MsgType::ack: return "ACK";
    case MsgType::data: return "DATA";
  }
  return "?";
}

std::vector<std::uint8_t> encode(const Message& m) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (m.params.size() > kMax || m.data.size() > kMax) throw Error(Errc::invalid_arguments, "payload too large");
  ByteWriter w;
  w.buffer().reserve(kHeaderSize + m.params.size() + m.data.size());
  w.raw(kMagic);
  w.u32(static_cast<std::uint32_t>(m.type));
  w.u32(static_cast<std::uint32_t>(m.cls));
  w.u32(m.sender);
  w.u32(m.recipient);
  w.u32(m.client);
  w.u32(m.file);
  w.u32(m.request);
  w.i32(m.status);
  w.u32(static_cast<std::uint32_t>(m.params.size()));
  w.u32(static_cast<std::uint32_t>(m.data.size()));
  w.raw(m.params);
  w.raw(m.data);
  return w.take();
}

Message decode(std::span<const std::uint8_t> frame) {
  const auto n = std::min<std::size_t>(frame.size(), 4);
  if (!std::equal(frame.begin(), frame.begin() + static_cast<std::ptrdiff_t>(n), kMagic)) {
    throw Error(Errc::bad_magic);
  }
  if (frame.size() < kHeaderSize) throw Error(Errc::truncated);
  ByteReader r(frame.subspan(4));
  Message m;
  const auto type = r.u32();
  const auto cls = r.u32();
  if (type < 1 || type > 16 || cls > 3) throw Error(Errc::unknown_type);
  m.type = static_cast<MsgType>(type);
  m.cls = static_cast<MsgClass>(cls);
  m.sender = r.u32();
  m.recipient = r.u32();
  m.client = r.u32();
  m.file = r.u32();
  m.request = r.u32();
  m.status = r.i32();
  const std::uint64_t plen = r.u32();
  const std::uint64_t dlen = r.u32();
  if (r.remaining() != plen + dlen) throw Error(Errc::truncated);
  auto p = r.raw(plen);
  auto d = r.raw(dlen);
  m.params.assign(p.begin(), p.end());
  m.data.assign(d.begin(), d.end());
  return m;
}

Message reply_to(const Message& req, std::uint32_t self, std::int32_t status) {
  Message m;
  m.type = MsgType::ack;
  m.cls = MsgClass::ack;
  m.sender = self;
  m.recipient = req.sender;
  m.client = req.client;
  m.file = req.file;
  m.request = req.request;
  m.status = status;
  return m;
}

Message error_reply(const Message& req, std::uint32_t self, Errc code) {
  return reply_to(req, self, -static_cast<std::int32_t>(code));
}

Transmission choose_transmission(std::uint64_t data_len, std::uint64_t threshold) {
  if (threshold == 0) throw Error(Errc::invalid_arguments, "inline threshold must be > 0");
  return data_len <= threshold ? Transmission::inline_data : Transmission::separate_data;
}

namespace {

void put_bytes(ByteWriter& w, const std::vector<std::uint8_t>& b) {
  w.u32(static_cast<std::uint32_t>(b.size()));
  w.raw(b);
}

std::vector<std::uint8_t> get_bytes(ByteReader& r) {
  auto n = r.u32();
  auto s = r.raw(n);
  return {s.begin(), s.end()};
}

// Guards list lengths against the bytes actually present.
std::uint32_t list_len(ByteReader& r, std::size_t elem_size) {
  auto n = r.u32();
  if (static_cast<std::uint64_t>(n) * elem_size > r.remaining()) throw Error(Errc::truncated);
  return n;
}

}  // namespace

void OpenParams::encode(ByteWriter& w) const {
  w.u32(flags);
  w.str(name);
  put_bytes(w, hint);
}

OpenParams OpenParams::decode(ByteReader& r) {
  OpenParams p;
  p.flags = r.u32();
  p.name = r.str();
  p.hint = get_bytes(r);
  return p;
}

void OpenReply::encode(ByteWriter& w) const {
  w.u32(file_id);
  w.u64(size);
  put_bytes(w, layout);
}

OpenReply OpenReply::decode(ByteReader& r) {
  OpenReply p;
  p.file_id = r.u32();
  p.size = r.u64();
  p.layout = get_bytes(r);
  return p;
}

void AccessParams::encode(ByteWriter& w) const {
  w.u32(handle);
  w.u64(offset);
  w.u64(length);
  w.u8(use_view);
  w.u8(explicit_at);
}

AccessParams AccessParams::decode(ByteReader& r) {
  AccessParams p;
  p.handle = r.u32();
  p.offset = r.u64();
  p.length = r.u64();
  p.use_view = r.u8();
  p.explicit_at = r.u8();
  return p;
}

void SubRequestParams::encode(ByteWriter& w) const {
  w.u64(expected_total);
  w.u8(separate_data);
  w.u32(static_cast<std::uint32_t>(pieces.size()));
  for (const auto& p : pieces) {
    w.u64(p.file_offset);
    w.u64(p.length);
    w.u64(p.stream_offset);
  }
}

SubRequestParams SubRequestParams::decode(ByteReader& r) {
  SubRequestParams p;
  p.expected_total = r.u64();
  p.separate_data = r.u8();
  p.pieces.resize(list_len(r, 24));
  for (auto& x : p.pieces) {
    x.file_offset = r.u64();
    x.length = r.u64();
    x.stream_offset = r.u64();
  }
  return p;
}

std::uint64_t AckParams::covered() const {
  std::uint64_t n = 0;
  for (const auto& s : segments) n += s.length;
  return n;
}

void AckParams::encode(ByteWriter& w) const {
  w.u8(static_cast<std::uint8_t>(kind));
  w.u64(expected_total);
  w.u8(data_follows);
  w.u32(static_cast<std::uint32_t>(segments.size()));
  for (const auto& s : segments) {
    w.u64(s.stream_offset);
    w.u64(s.length);
  }
}

AckParams AckParams::decode(ByteReader& r) {
  AckParams p;
  const auto kind = r.u8();
  if (kind > 2) throw Error(Errc::invalid_arguments, "bad ack kind");
  p.kind = static_cast<AckKind>(kind);
  p.expected_total = r.u64();
  p.data_follows = r.u8();
  p.segments.resize(list_len(r, 16));
  for (auto& s : p.segments) {
    s.stream_offset = r.u64();
    s.length = r.u64();
  }
  return p;
}

void SetViewParams::encode(ByteWriter& w) const {
  w.u32(handle);
  w.u64(disp);
  w.u8(etype);
  put_bytes(w, descriptor);
}

SetViewParams SetViewParams::decode(ByteReader& r) {
  SetViewParams p;
  p.handle = r.u32();
  p.disp = r.u64();
  p.etype = r.u8();
  p.descriptor = get_bytes(r);
  return p;
}

void SizeParams::encode(ByteWriter& w) const {
  w.u8(static_cast<std::uint8_t>(mode));
  w.u64(size);
}

SizeParams SizeParams::decode(ByteReader& r) {
  SizeParams p;
  const auto mode = r.u8();
  if (mode > 2) throw Error(Errc::invalid_arguments, "bad size mode");
  p.mode = static_cast<SizeMode>(mode);
  p.size = r.u64();
  return p;
}

}  // namespace vipio::proto
