#pragma once

// HPF runtime descriptors and the per-process access descriptors derived
// from them.
//
// Flat layout: [a, b_1..b_a, c, d, e, then (global, local, dist, arg) per
// data dimension]. a is the grid rank, b the grid extents, c an element type
// code, d the element size in bytes, e the data rank. Data dimensions are
// listed fastest first (column-major storage), so the outermost descriptor
// level describes the last dimension. Ranks are 0-based and map to grid
// coordinates column-major as well.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vipio/viewdesc.hpp"

namespace vipio::dist {

enum class Kind : std::int64_t { none = 0, block = 1, cyclic = 2, gen_block = 3, indirect = 4 };

struct DimSpec {
  std::int64_t global_len = 0;
  std::int64_t local_len = 0;
  Kind kind = Kind::none;
  std::int64_t arg = 0;
};

struct RuntimeDescriptor {
  std::vector<std::int64_t> grid;
  std::int64_t type_code = 0;
  std::int64_t elem_size = 1;
  std::vector<DimSpec> dims;

  std::int64_t nprocs() const;
  std::int64_t total_bytes() const;
};

// MalformedDescriptor when the sequence is inconsistent with its header;
// UnsupportedDistribution for GEN_BLOCK and INDIRECT.
RuntimeDescriptor parse_runtime_descriptor(std::span<const std::int64_t> ints);
std::vector<std::int64_t> to_flat(const RuntimeDescriptor& rd);

// JSON form: {"grid":[3,4],"type_code":0,"elem_size":4,
//             "dims":[{"global":14,"local":3,"dist":"cyclic","arg":3},...]}
RuntimeDescriptor parse_runtime_descriptor_json(std::string_view json);
std::string to_json(const RuntimeDescriptor& rd);

// Grid coordinate of `rank` for every data dimension (0 for undistributed).
std::vector<std::int64_t> rank_coords(const RuntimeDescriptor& rd, std::int64_t rank);

// Elements of dimension `dim` owned by `rank`.
std::int64_t derived_local_len(const RuntimeDescriptor& rd, std::size_t dim, std::int64_t rank);
// Copy of rd with every local_len re-derived for `rank`.
RuntimeDescriptor for_rank(const RuntimeDescriptor& rd, std::int64_t rank);

struct ProcessView {
  std::int64_t rank = 0;
  std::vector<std::int64_t> coords;
  view::AccessDesc descriptor;
  std::int64_t total_bytes = 0;
};

// rd's local lengths must be the ones `rank` owns (LocalLengthMismatch).
ProcessView build_process_view(const RuntimeDescriptor& rd, std::int64_t rank);

struct ByteRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct CoverReport {
  std::int64_t ranks = 0;
  std::int64_t file_bytes = 0;
  std::vector<ByteRange> overlaps;
  std::vector<ByteRange> gaps;
  std::vector<std::int64_t> rank_bytes;

  bool partition() const { return overlaps.empty() && gaps.empty(); }
};

// Local lengths are derived per rank.
CoverReport cover_check(const RuntimeDescriptor& rd);
// One descriptor per rank, taken as given (local lengths are trusted).
CoverReport cover_check(std::span<const RuntimeDescriptor> per_rank);

}  // namespace vipio::dist
