#include "vipio/protocol.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vipio;
using namespace vipio::proto;

namespace {

template <class F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::ok;
}

Message sample_read() {
  Message m;
  m.type = MsgType::read;
  m.cls = MsgClass::er;
  m.sender = 0x10000;
  m.recipient = 2;
  m.client = 0x10000;
  m.file = 7;
  m.request = 99;
  m.params.assign(12, 0xab);
  return m;
}

}  // namespace

TEST(Codec, RoundTripsReadRequest) {
  auto m = sample_read();
  auto wire = encode(m);
  EXPECT_EQ(wire.size(), kHeaderSize + 12);
  EXPECT_EQ(decode(wire), m);
}

TEST(Codec, HeaderOnlyAckIs44Bytes) {
  // magic + ten 4-byte fields
  EXPECT_EQ(encode(Message{}).size(), std::size_t{4 + 10 * 4});
}

TEST(Codec, FieldsAreLittleEndianAtFixedOffsets) {
  auto m = sample_read();
  m.status = -3;
  m.data = {1, 2, 3};
  auto w = encode(m);
  auto at = [&](std::size_t o) {
    return std::uint32_t(w[o]) | std::uint32_t(w[o + 1]) << 8 | std::uint32_t(w[o + 2]) << 16 |
           std::uint32_t(w[o + 3]) << 24;
  };
  EXPECT_EQ(std::string(w.begin(), w.begin() + 4), "VIP1");
  EXPECT_EQ(at(4), 5u);
  EXPECT_EQ(at(8), 0u);
  EXPECT_EQ(at(12), 0x10000u);
  EXPECT_EQ(at(16), 2u);
  EXPECT_EQ(at(24), 7u);
  EXPECT_EQ(at(28), 99u);
  EXPECT_EQ(static_cast<std::int32_t>(at(32)), -3);
  EXPECT_EQ(at(36), 12u);
  EXPECT_EQ(at(40), 3u);
}

TEST(Codec, DecodeErrors) {
  auto w = encode(sample_read());
  auto bad = w;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode(bad); }), Errc::bad_magic);
  EXPECT_EQ(code_of([&] { decode(std::span(w).first(20)); }), Errc::truncated);
  EXPECT_EQ(code_of([&] { decode(std::span(w).first(w.size() - 1)); }), Errc::truncated);
  auto longer = w;
  longer.push_back(0);
  EXPECT_EQ(code_of([&] { decode(longer); }), Errc::truncated);
  auto type = w;
  type[4] = 17;
  EXPECT_EQ(code_of([&] { decode(type); }), Errc::unknown_type);
  type[4] = 0;
  EXPECT_EQ(code_of([&] { decode(type); }), Errc::unknown_type);
  auto cls = w;
  cls[8] = 4;
  EXPECT_EQ(code_of([&] { decode(cls); }), Errc::unknown_type);
}

TEST(Codec, FuzzYieldsOnlyDefinedErrors) {
  std::mt19937_64 rng(11);
  auto valid = encode(sample_read());
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::uint8_t> buf;
    if (i % 2 == 0) {
      buf.resize(rng() % 96);
      for (auto& b : buf) b = static_cast<std::uint8_t>(rng());
      if (buf.size() >= 4 && i % 4 == 0) std::copy(kMagic, kMagic + 4, buf.begin());
    } else {
      buf = valid;
      buf[rng() % buf.size()] = static_cast<std::uint8_t>(rng());
      if (rng() % 3 == 0) buf.resize(rng() % (buf.size() + 1));
    }
    const auto e = code_of([&] { decode(buf); });
    EXPECT_TRUE(e == Errc::ok || e == Errc::bad_magic || e == Errc::truncated || e == Errc::unknown_type);
  }
}

TEST(Transmission, BoundaryIsInline) {
  EXPECT_EQ(choose_transmission(4096, 65536), Transmission::inline_data);
  EXPECT_EQ(choose_transmission(2 << 20, 65536), Transmission::separate_data);
  EXPECT_EQ(choose_transmission(65536, 65536), Transmission::inline_data);
  EXPECT_EQ(choose_transmission(65537, 65536), Transmission::separate_data);
  EXPECT_EQ(code_of([] { choose_transmission(1, 0); }), Errc::invalid_arguments);
}

TEST(Replies, PreserveTriple) {
  auto m = sample_read();
  auto r = error_reply(m, 2, Errc::no_such_file);
  EXPECT_EQ(r.recipient, m.sender);
  EXPECT_EQ(r.client, m.client);
  EXPECT_EQ(r.file, m.file);
  EXPECT_EQ(r.request, m.request);
  EXPECT_EQ(r.cls, MsgClass::ack);
  EXPECT_EQ(r.error(), Errc::no_such_file);
}

TEST(Params, RoundTrip) {
  AckParams a{AckKind::done, 1234, 1, {{0, 10}, {50, 7}}};
  auto b = unpack<AckParams>(pack(a));
  EXPECT_EQ(b.kind, AckKind::done);
  EXPECT_EQ(b.expected_total, 1234u);
  EXPECT_EQ(b.segments, a.segments);
  EXPECT_EQ(b.covered(), 17u);

  SubRequestParams s{99, 1, {{5, 6, 7}, {8, 9, 10}}};
  auto t = unpack<SubRequestParams>(pack(s));
  EXPECT_EQ(t.pieces, s.pieces);
  EXPECT_EQ(t.separate_data, 1);

  OpenParams o{mode::rdwr | mode::create, "name", {1, 2}};
  auto p = unpack<OpenParams>(pack(o));
  EXPECT_EQ(p.name, "name");
  EXPECT_EQ(p.hint, o.hint);

  auto bytes = pack(AccessParams{3, 4, 5, 1, 0});
  bytes.push_back(0);
  EXPECT_EQ(code_of([&] { unpack<AccessParams>(bytes); }), Errc::invalid_arguments);
  bytes.resize(5);
  EXPECT_EQ(code_of([&] { unpack<AccessParams>(bytes); }), Errc::invalid_arguments);
  // A huge list length must not allocate.
  std::vector<std::uint8_t> lie = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff, 0xff, 0xff};
  EXPECT_EQ(code_of([&] { unpack<AckParams>(lie); }), Errc::invalid_arguments);
}

TEST(Modes, Matrix) {
  EXPECT_NO_THROW(mode::check(mode::rdwr | mode::create));
  EXPECT_NO_THROW(mode::check(mode::wronly | mode::sequential));
  EXPECT_EQ(code_of([] { mode::check(mode::rdonly | mode::create); }), Errc::mode_conflict);
  EXPECT_EQ(code_of([] { mode::check(mode::rdonly | mode::excl); }), Errc::mode_conflict);
  EXPECT_EQ(code_of([] { mode::check(mode::rdwr | mode::sequential); }), Errc::mode_conflict);
  EXPECT_EQ(code_of([] { mode::check(mode::rdwr | mode::rdonly); }), Errc::mode_conflict);
  EXPECT_EQ(code_of([] { mode::check(mode::create); }), Errc::mode_conflict);
  EXPECT_EQ(code_of([] { mode::check(mode::rdwr | 1024); }), Errc::mode_conflict);
}
