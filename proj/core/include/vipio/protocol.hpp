#pragma once

// Wire messages. Every frame is a 44-byte little-endian header followed by
// param_len bytes of type-specific parameters and data_len bytes of raw data.
//
//   offset  field
//        0  magic "VIP1"
//        4  msg_type   u32 (1..16)
//        8  msg_class  u32 (0..3)
//       12  sender     u32
//       16  recipient  u32
//       20  client     u32
//       24  file       u32
//       28  request    u32
//       32  status     i32 (negative Errc on failure)
//       36  param_len  u32
//       40  data_len   u32

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vipio/bytes.hpp"
#include "vipio/error.hpp"

namespace vipio::mode {

inline constexpr std::uint32_t rdonly = 1;
inline constexpr std::uint32_t wronly = 2;
inline constexpr std::uint32_t rdwr = 4;
inline constexpr std::uint32_t create = 8;
inline constexpr std::uint32_t excl = 16;
inline constexpr std::uint32_t delete_on_close = 32;
inline constexpr std::uint32_t unique_open = 64;
inline constexpr std::uint32_t sequential = 128;
inline constexpr std::uint32_t append = 256;

// ModeConflict unless exactly one access mode is given, RDONLY comes
// without CREATE/EXCL, and RDWR without SEQUENTIAL.
void check(std::uint32_t flags);

}  // namespace vipio::mode

namespace vipio::proto {

enum class MsgType : std::uint32_t {
  connect = 1,
  disconnect = 2,
  open = 3,
  close = 4,
  read = 5,
  write = 6,
  seek = 7,
  remove = 8,
  set_size = 9,
  get_size = 10,
  set_view = 11,
  hint = 12,
  admin = 13,
  shutdown = 14,
  ack = 15,
  data = 16,
};

enum class MsgClass : std::uint32_t { er = 0, di = 1, bi = 2, ack = 3 };

const char* type_name(MsgType t);

inline constexpr std::size_t kHeaderSize = 44;
inline constexpr std::uint8_t kMagic[4] = {'V', 'I', 'P', '1'};

struct Message {
  MsgType type = MsgType::ack;
  MsgClass cls = MsgClass::ack;
  std::uint32_t sender = 0;
  std::uint32_t recipient = 0;
  std::uint32_t client = 0;
  std::uint32_t file = 0;
  std::uint32_t request = 0;
  std::int32_t status = 0;
  std::vector<std::uint8_t> params;
  std::vector<std::uint8_t> data;

  bool ok() const { return status >= 0; }
  Errc error() const { return status >= 0 ? Errc::ok : static_cast<Errc>(-status); }

  friend bool operator==(const Message&, const Message&) = default;
};

std::vector<std::uint8_t> encode(const Message& m);
// BadMagic, Truncated (short input or lengths that disagree with the frame),
// UnknownType (type or class out of range).
Message decode(std::span<const std::uint8_t> frame);

// A reply addressed back to the sender of `req`, preserving the
// (client, file, request) triple.
Message reply_to(const Message& req, std::uint32_t self, std::int32_t status = 0);
Message error_reply(const Message& req, std::uint32_t self, Errc code);

enum class Transmission : std::uint8_t { inline_data, separate_data };

inline constexpr std::uint64_t kDefaultInlineThreshold = 64 * 1024;

// Inline iff data_len <= threshold.
Transmission choose_transmission(std::uint64_t data_len, std::uint64_t threshold);

// ---------------------------------------------------------------- params

// OPEN: flags, name, optional file-administration hint (opaque bytes whose
// layout is owned by the server's layout module).
struct OpenParams {
  std::uint32_t flags = 0;
  std::string name;
  std::vector<std::uint8_t> hint;

  void encode(ByteWriter& w) const;
  static OpenParams decode(ByteReader& r);
};

struct OpenReply {
  std::uint32_t file_id = 0;
  std::uint64_t size = 0;
  std::vector<std::uint8_t> layout;  // set only on controller replies

  void encode(ByteWriter& w) const;
  static OpenReply decode(ByteReader& r);
};

// READ/WRITE from a client. `offset` is a view-stream byte offset when
// use_view is set, an absolute byte offset otherwise.
struct AccessParams {
  std::uint32_t handle = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint8_t use_view = 0;
  std::uint8_t explicit_at = 0;

  void encode(ByteWriter& w) const;
  static AccessParams decode(ByteReader& r);
};

// A piece of a request: `length` bytes at logical file offset `file_offset`
// that occupy [stream_offset, stream_offset + length) of the request stream.
struct Piece {
  std::uint64_t file_offset = 0;
  std::uint64_t length = 0;
  std::uint64_t stream_offset = 0;

  friend bool operator==(const Piece&, const Piece&) = default;
};

// DI/BI READ/WRITE sub-request. For inline writes the message data holds
// the pieces' bytes back to back.
struct SubRequestParams {
  std::uint64_t expected_total = 0;
  std::uint8_t separate_data = 0;
  std::vector<Piece> pieces;

  void encode(ByteWriter& w) const;
  static SubRequestParams decode(ByteReader& r);
};

struct Segment {
  std::uint64_t stream_offset = 0;
  std::uint64_t length = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class AckKind : std::uint8_t { plain = 0, ready = 1, done = 2 };

// Data-path acknowledge. `segments` locate this chunk in the request
// stream; for reads the bytes arrive inline or in the DATA message that
// follows, for READY they are the bytes the server wants next.
struct AckParams {
  AckKind kind = AckKind::plain;
  std::uint64_t expected_total = 0;
  std::uint8_t data_follows = 0;
  std::vector<Segment> segments;

  std::uint64_t covered() const;

  void encode(ByteWriter& w) const;
  static AckParams decode(ByteReader& r);
};

struct SetViewParams {
  std::uint32_t handle = 0;
  std::uint64_t disp = 0;
  std::uint8_t etype = 0;
  std::vector<std::uint8_t> descriptor;

  void encode(ByteWriter& w) const;
  static SetViewParams decode(ByteReader& r);
};

enum class SizeMode : std::uint8_t { get = 0, set = 1, extend = 2 };

struct SizeParams {
  SizeMode mode = SizeMode::get;
  std::uint64_t size = 0;

  void encode(ByteWriter& w) const;
  static SizeParams decode(ByteReader& r);
};

// First params byte of ADMIN messages.
//   install   DI  u32 file, str name, u64 size, bytes portions
//   drop      DI  u32 file
//   inspect   ER  str name                  -> str json
//   barrier   ER  str group, u32 count, u8 etype
//   sync      ER  (file in header)
enum class AdminOp : std::uint8_t { install = 1, drop = 2, inspect = 3, barrier = 4, sync = 5 };

// First params byte of HINT messages.
//   prefetch        str name...   accepted, no effect
//   administration  u32 server, u32 disk, u64 latency in microseconds per MiB
enum class HintKind : std::uint8_t { prefetch = 0, administration = 1 };

// SHUTDOWN DI phases: drain stops new external requests and waits for the
// running ones, stop waits for everything else and exits.
enum class ShutdownPhase : std::uint8_t { drain = 1, stop = 2 };

template <class P>
std::vector<std::uint8_t> pack(const P& p) {
  ByteWriter w;
  p.encode(w);
  return w.take();
}

// Decodes params; any underrun or trailing byte is InvalidArguments.
template <class P>
P unpack(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  try {
    P p = P::decode(r);
    if (!r.done()) throw Error(Errc::invalid_arguments, "trailing parameter bytes");
    return p;
  } catch (const Error& e) {
    if (e.code() == Errc::truncated) throw Error(Errc::invalid_arguments, "short parameter block");
    throw;
  }
}

}  // namespace vipio::proto
