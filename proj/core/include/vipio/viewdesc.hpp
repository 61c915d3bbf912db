#pragma once

// Access descriptors: the flattened, recursive form of a file view.
//
// A block lays out `offset` bytes of gap, then `repeat` repetitions of
// `count` units separated by `stride` bytes of gap. A unit is one byte at a
// leaf and one subtype instance (sub_count bytes wide) otherwise. After all
// blocks of a level, `skip` bytes are passed over.

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "vipio/datatypes.hpp"

namespace vipio::view {

struct AccessDesc;

struct BasicBlock {
  std::int64_t offset = 0;
  std::int64_t repeat = 1;
  std::int64_t count = 0;
  std::int64_t stride = 0;
  std::shared_ptr<AccessDesc> subtype;
  // Filled by fill_counts.
  std::int64_t sub_count = 1;
  std::int64_t sub_actual = 1;

  bool is_leaf() const { return subtype == nullptr; }
};

struct AccessDesc {
  std::int64_t skip = 0;
  std::vector<BasicBlock> blocks;
  // Filled by fill_counts.
  std::int64_t total_extent = 0;
  std::int64_t total_actual = 0;

  std::size_t no_blocks() const { return blocks.size(); }
};

bool operator==(const AccessDesc& a, const AccessDesc& b);

struct ByteRun {
  std::int64_t file_offset = 0;
  std::int64_t length = 0;

  friend bool operator==(const ByteRun&, const ByteRun&) = default;
};

struct BuildResult {
  AccessDesc desc;
  bool contiguous = false;
};

// Normalizes `t` first. The result has its counts filled.
BuildResult build_descriptor(const dt::Datatype& t);
// Same, but every leaf of `t` must be `etype` (EtypeMismatch otherwise).
BuildResult build_descriptor(const dt::Datatype& t, dt::BaseType etype);

// Populates sub_count/sub_actual bottom-up; returns (extent, actual).
std::pair<std::int64_t, std::int64_t> fill_counts(AccessDesc& d);

// View-relative byte offset to absolute byte position, wrapping circularly
// over periods. Precondition: total_actual > 0.
std::int64_t absolute_offset(const AccessDesc& d, std::int64_t view_offset);

// Runs covering `length` accessible bytes from view offset `view_start`,
// shifted by `disp`, coalesced.
std::vector<ByteRun> enumerate_runs(const AccessDesc& d, std::int64_t disp, std::int64_t view_start,
                                    std::int64_t length);

// NotAligned when n is not a multiple of the etype extent.
std::int64_t byte_to_etype(std::int64_t n, dt::BaseType et);
std::int64_t etype_to_byte(std::int64_t n, dt::BaseType et);

std::vector<std::uint8_t> serialize(const AccessDesc& d);
// MalformedDescriptor on bad input. Counts are refilled.
AccessDesc deserialize(std::span<const std::uint8_t> bytes);

}  // namespace vipio::view
