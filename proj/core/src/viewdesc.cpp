#include "vipio/viewdesc.hpp"

#include <algorithm>

#include "vipio/bytes.hpp"

namespace vipio::view {

namespace {

using dt::Datatype;

BasicBlock make_block(std::int64_t offset, std::int64_t repeat, std::int64_t count, std::int64_t gap,
                      const Datatype& child) {
  BasicBlock b;
  b.offset = offset;
  b.repeat = repeat;
  b.stride = repeat == 1 ? 0 : gap;
  if (child.is_base()) {
    b.count = count * child.extent();
    return b;
  }
  auto sub = std::make_shared<AccessDesc>(build_descriptor(child).desc);
  if (sub->total_actual == sub->total_extent) {
    // A hole-free subtype is just bytes.
    b.count = count * sub->total_extent;
  } else {
    b.count = count;
    b.subtype = std::move(sub);
  }
  return b;
}

AccessDesc build_normalized(const Datatype& t) {
  AccessDesc d;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dt::Base>) {
          d.blocks.push_back(make_block(0, 1, 1, 0, t));
        } else if constexpr (std::is_same_v<T, dt::Contiguous>) {
          d.blocks.push_back(make_block(0, 1, n.count, 0, t.child()));
        } else if constexpr (std::is_same_v<T, dt::HVector>) {
          const std::int64_t gap = n.stride_bytes - n.blocklen * t.child().extent();
          d.blocks.push_back(make_block(0, n.count, n.blocklen, gap, t.child()));
        } else if constexpr (std::is_same_v<T, dt::HIndexed> || std::is_same_v<T, dt::Struct>) {
          std::int64_t end = 0;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
            const auto& child = t.children()[std::is_same_v<T, dt::Struct> ? i : 0];
            d.blocks.push_back(make_block(n.displs_bytes[i] - end, 1, n.blocklens[i], 0, child));
            end = n.displs_bytes[i] + n.blocklens[i] * child.extent();
          }
          if constexpr (std::is_same_v<T, dt::Struct>) {
            if (n.upper_bound) d.skip = *n.upper_bound - end;
          }
        } else {
          throw Error(Errc::invalid_arguments, "datatype not normalized: " + dt::to_string(t));
        }
      },
      t.node());
  fill_counts(d);
  return d;
}

bool equal_blocks(const BasicBlock& a, const BasicBlock& b) {
  if (a.offset != b.offset || a.repeat != b.repeat || a.count != b.count || a.stride != b.stride) return false;
  if (a.is_leaf() != b.is_leaf()) return false;
  return a.is_leaf() || *a.subtype == *b.subtype;
}

// Walks one period of `d` starting at absolute `base`, skipping the first
// `skip_acc` accessible bytes and emitting at most `remaining` bytes.
class RunEmitter {
 public:
  RunEmitter(std::vector<ByteRun>& out, std::int64_t remaining) : out_(out), remaining_(remaining) {}

  std::int64_t remaining() const { return remaining_; }

  void walk(const AccessDesc& d, std::int64_t base, std::int64_t skip_acc) {
    std::int64_t pos = base;
    for (const auto& b : d.blocks) {
      if (remaining_ == 0) return;
      pos += b.offset;
      const std::int64_t rep_act = b.count * b.sub_actual;
      const std::int64_t rep_ext = b.count * b.sub_count;
      const std::int64_t block_act = b.repeat * rep_act;
      const std::int64_t block_span = b.repeat * rep_ext + (b.repeat - 1) * b.stride;
      if (skip_acc >= block_act) {
        skip_acc -= block_act;
        pos += block_span;
        continue;
      }
      std::int64_t rep = rep_act == 0 ? b.repeat : skip_acc / rep_act;
      std::int64_t within = rep_act == 0 ? 0 : skip_acc % rep_act;
      skip_acc = 0;
      for (; rep < b.repeat && remaining_ > 0; ++rep) {
        const std::int64_t rep_base = pos + rep * (rep_ext + b.stride);
        if (b.is_leaf()) {
          emit(rep_base + within, b.count - within);
        } else {
          std::int64_t inst = within / b.sub_actual;
          std::int64_t inner = within % b.sub_actual;
          for (; inst < b.count && remaining_ > 0; ++inst) {
            walk(*b.subtype, rep_base + inst * b.sub_count, inner);
            inner = 0;
          }
        }
        within = 0;
      }
      pos += block_span;
    }
  }

 private:
  void emit(std::int64_t off, std::int64_t len) {
    len = std::min(len, remaining_);
    if (len <= 0) return;
    remaining_ -= len;
    if (!out_.empty() && out_.back().file_offset + out_.back().length == off) {
      out_.back().length += len;
    } else {
      out_.push_back({off, len});
    }
  }

  std::vector<ByteRun>& out_;
  std::int64_t remaining_;
};

void write_desc(ByteWriter& w, const AccessDesc& d) {
  w.u32(static_cast<std::uint32_t>(d.blocks.size()));
  w.i64(d.skip);
  for (const auto& b : d.blocks) {
    w.i64(b.offset);
    w.i64(b.repeat);
    w.i64(b.count);
    w.i64(b.stride);
    w.i64(b.sub_count);
    w.u8(b.subtype ? 1 : 0);
    if (b.subtype) write_desc(w, *b.subtype);
  }
}

constexpr int kMaxDepth = 64;
constexpr std::size_t kBlockWireSize = 5 * 8 + 1;

AccessDesc read_desc(ByteReader& r, int depth) {
  if (depth > kMaxDepth) throw Error(Errc::malformed_descriptor, "descriptor too deep");
  AccessDesc d;
  const auto n = r.u32();
  d.skip = r.i64();
  if (static_cast<std::size_t>(n) * kBlockWireSize > r.remaining()) throw Error(Errc::truncated);
  if (d.skip < 0) throw Error(Errc::malformed_descriptor, "negative skip");
  d.blocks.resize(n);
  for (auto& b : d.blocks) {
    b.offset = r.i64();
    b.repeat = r.i64();
    b.count = r.i64();
    b.stride = r.i64();
    b.sub_count = r.i64();
    const auto present = r.u8();
    if (present > 1) throw Error(Errc::malformed_descriptor, "bad subtype flag");
    if (b.offset < 0 || b.repeat < 1 || b.count < 0 || b.stride < 0) {
      throw Error(Errc::malformed_descriptor, "negative block field");
    }
    if (present) b.subtype = std::make_shared<AccessDesc>(read_desc(r, depth + 1));
  }
  return d;
}

}  // namespace

bool operator==(const AccessDesc& a, const AccessDesc& b) {
  if (a.skip != b.skip || a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (!equal_blocks(a.blocks[i], b.blocks[i])) return false;
  }
  return true;
}

BuildResult build_descriptor(const Datatype& t) {
  BuildResult r;
  r.desc = build_normalized(dt::normalize(t));
  r.contiguous = r.desc.total_actual == r.desc.total_extent;
  return r;
}

BuildResult build_descriptor(const Datatype& t, dt::BaseType etype) {
  try {
    if (dt::element_type_of(t, true) != etype) throw Error(Errc::etype_mismatch, dt::to_string(t));
  } catch (const Error& e) {
    if (e.code() == Errc::heterogeneous_leaves) throw Error(Errc::etype_mismatch, e.what());
    throw;
  }
  return build_descriptor(t);
}

std::pair<std::int64_t, std::int64_t> fill_counts(AccessDesc& d) {
  std::int64_t extent = 0;
  std::int64_t actual = 0;
  for (auto& b : d.blocks) {
    if (b.subtype) {
      auto [e, a] = fill_counts(*b.subtype);
      b.sub_count = e;
      b.sub_actual = a;
    } else {
      b.sub_count = 1;
      b.sub_actual = 1;
    }
    extent += b.offset + b.repeat * b.count * b.sub_count + (b.repeat - 1) * b.stride;
    actual += b.repeat * b.count * b.sub_actual;
  }
  extent += d.skip;
  d.total_extent = extent;
  d.total_actual = actual;
  return {extent, actual};
}

namespace {

// Offset within one period; 0 <= r < d.total_actual.
std::int64_t locate(const AccessDesc& d, std::int64_t r) {
  std::int64_t pos = 0;
  for (const auto& b : d.blocks) {
    pos += b.offset;
    const std::int64_t rep_act = b.count * b.sub_actual;
    const std::int64_t rep_ext = b.count * b.sub_count;
    const std::int64_t block_act = b.repeat * rep_act;
    if (r < block_act) {
      pos += (r / rep_act) * (rep_ext + b.stride);
      r %= rep_act;
      pos += (r / b.sub_actual) * b.sub_count;
      r %= b.sub_actual;
      return b.is_leaf() ? pos + r : pos + locate(*b.subtype, r);
    }
    r -= block_act;
    pos += b.repeat * rep_ext + (b.repeat - 1) * b.stride;
  }
  throw Error(Errc::invalid_arguments, "offset beyond period");
}

}  // namespace

std::int64_t absolute_offset(const AccessDesc& d, std::int64_t view_offset) {
  if (d.total_actual <= 0) throw Error(Errc::invalid_arguments, "view has no accessible bytes");
  if (view_offset < 0) throw Error(Errc::invalid_arguments, "negative view offset");
  const std::int64_t wraps = view_offset / d.total_actual;
  return wraps * d.total_extent + locate(d, view_offset % d.total_actual);
}

std::vector<ByteRun> enumerate_runs(const AccessDesc& d, std::int64_t disp, std::int64_t view_start,
                                    std::int64_t length) {
  std::vector<ByteRun> out;
  if (length <= 0) return out;
  if (d.total_actual <= 0) throw Error(Errc::invalid_arguments, "view has no accessible bytes");
  if (view_start < 0) throw Error(Errc::invalid_arguments, "negative view offset");
  std::int64_t period = view_start / d.total_actual;
  std::int64_t skip = view_start % d.total_actual;
  if (d.total_actual == d.total_extent) {
    out.push_back({disp + period * d.total_extent + skip, length});
    return out;
  }
  RunEmitter em(out, length);
  while (em.remaining() > 0) {
    em.walk(d, disp + period * d.total_extent, skip);
    skip = 0;
    ++period;
  }
  return out;
}

std::int64_t byte_to_etype(std::int64_t n, dt::BaseType et) {
  if (n % et.extent() != 0) throw Error(Errc::not_aligned);
  return n / et.extent();
}

std::int64_t etype_to_byte(std::int64_t n, dt::BaseType et) { return n * et.extent(); }

std::vector<std::uint8_t> serialize(const AccessDesc& d) {
  ByteWriter w;
  write_desc(w, d);
  return w.take();
}

AccessDesc deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  AccessDesc d;
  try {
    d = read_desc(r, 0);
  } catch (const Error& e) {
    if (e.code() == Errc::truncated) throw Error(Errc::malformed_descriptor, "truncated descriptor");
    throw;
  }
  if (!r.done()) throw Error(Errc::malformed_descriptor, "trailing bytes");
  fill_counts(d);
  return d;
}

}  // namespace vipio::view
