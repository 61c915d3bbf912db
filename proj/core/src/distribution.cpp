#include "vipio/distribution.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "json.hpp"

namespace vipio::dist {

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::malformed_descriptor, what); }

bool distributed(Kind k) { return k != Kind::none; }

// Grid dimension serving data dimension `dim`, or -1.
std::ptrdiff_t grid_dim_of(const RuntimeDescriptor& rd, std::size_t dim) {
  if (rd.grid.size() == rd.dims.size()) return static_cast<std::ptrdiff_t>(dim);
  std::ptrdiff_t g = 0;
  for (std::size_t i = 0; i < dim; ++i) g += distributed(rd.dims[i].kind) ? 1 : 0;
  return distributed(rd.dims[dim].kind) ? g : -1;
}

std::int64_t procs_of(const RuntimeDescriptor& rd, std::size_t dim) {
  auto g = grid_dim_of(rd, dim);
  return g < 0 ? 1 : rd.grid[static_cast<std::size_t>(g)];
}

void validate(const RuntimeDescriptor& rd) {
  if (rd.grid.empty()) malformed("empty processor grid");
  if (rd.dims.empty()) malformed("no data dimensions");
  if (rd.elem_size < 1) malformed("element size < 1");
  for (auto b : rd.grid) {
    if (b < 1) malformed("grid extent < 1");
  }
  const auto ndist = std::count_if(rd.dims.begin(), rd.dims.end(), [](const DimSpec& d) { return distributed(d.kind); });
  if (rd.grid.size() != rd.dims.size() && static_cast<std::ptrdiff_t>(rd.grid.size()) != ndist) {
    malformed("grid rank matches neither the data rank nor the distributed dimensions");
  }
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    const auto& d = rd.dims[i];
    if (d.kind == Kind::gen_block || d.kind == Kind::indirect) throw Error(Errc::unsupported_distribution);
    if (d.kind != Kind::none && d.kind != Kind::block && d.kind != Kind::cyclic) malformed("unknown distribution");
    if (d.global_len < 1) malformed("global length < 1");
    if (d.local_len < 0 || d.local_len > d.global_len) malformed("local length out of range");
    if (d.kind != Kind::none && d.arg < 1) malformed("distribution argument < 1");
    if (d.kind == Kind::block && d.arg * procs_of(rd, i) < d.global_len) malformed("BLOCK argument too small");
  }
}

Kind kind_from_code(std::int64_t code) {
  if (code < 0 || code > 4) malformed("unknown distribution code " + std::to_string(code));
  return static_cast<Kind>(code);
}

// One dimension's level. Offsets, strides and skip are in bytes; counts are
// bytes at the leaf and subtype instances above it.
view::AccessDesc dimension_level(const DimSpec& d, std::int64_t procs, std::int64_t coord, std::int64_t unit,
                                 bool leaf) {
  view::AccessDesc level;
  const std::int64_t g = d.global_len;
  const std::int64_t scale = leaf ? unit : 1;
  auto block = [&](std::int64_t offset, std::int64_t repeat, std::int64_t count, std::int64_t stride) {
    view::BasicBlock b;
    b.offset = offset * unit;
    b.repeat = repeat;
    b.count = count * scale;
    b.stride = repeat == 1 ? 0 : stride * unit;
    level.blocks.push_back(b);
  };

  if (d.kind == Kind::none) {
    block(0, g, 1, 0);
    return level;
  }
  const std::int64_t a = d.arg;
  const std::int64_t l = d.local_len;
  if (l == 0) {
    block(0, 1, 0, 0);
    level.skip = g * unit;
    return level;
  }
  std::int64_t end = 0;
  if (d.kind == Kind::block) {
    block(a * coord, 1, l, 0);
    end = a * coord + l;
  } else {
    const std::int64_t regular = l / a;
    const std::int64_t irregular = l % a;
    const std::int64_t first = a * coord;
    if (regular > 0) {
      block(first, regular, a, (procs - 1) * a);
      end = first + (regular - 1) * procs * a + a;
    }
    if (irregular > 0) {
      const std::int64_t start = first + regular * procs * a;
      block(start - end, 1, irregular, 0);
      end = start + irregular;
    }
  }
  level.skip = std::max<std::int64_t>(0, g - end) * unit;
  return level;
}

view::AccessDesc build_levels(const RuntimeDescriptor& rd, const std::vector<std::int64_t>& coords) {
  // unit[i]: bytes spanned by one index step of dimension i.
  std::vector<std::int64_t> unit(rd.dims.size());
  std::int64_t u = rd.elem_size;
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    unit[i] = u;
    u *= rd.dims[i].global_len;
  }
  std::shared_ptr<view::AccessDesc> inner;
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    auto level = dimension_level(rd.dims[i], procs_of(rd, i), coords[i], unit[i], i == 0);
    if (inner) {
      for (auto& b : level.blocks) b.subtype = inner;
    }
    inner = std::make_shared<view::AccessDesc>(std::move(level));
  }
  view::AccessDesc out = *inner;
  view::fill_counts(out);
  return out;
}

ProcessView make_view(const RuntimeDescriptor& rd, std::int64_t rank) {
  ProcessView pv;
  pv.rank = rank;
  pv.coords = rank_coords(rd, rank);
  pv.descriptor = build_levels(rd, pv.coords);
  pv.total_bytes = pv.descriptor.total_actual;
  return pv;
}

void append_range(std::vector<ByteRange>& v, std::int64_t b, std::int64_t e) {
  if (b >= e) return;
  if (!v.empty() && v.back().end == b) {
    v.back().end = e;
  } else {
    v.push_back({b, e});
  }
}

CoverReport sweep(const std::vector<ProcessView>& views, std::int64_t file_bytes) {
  CoverReport rep;
  rep.ranks = static_cast<std::int64_t>(views.size());
  rep.file_bytes = file_bytes;
  std::map<std::int64_t, std::int64_t> delta;
  delta[0] += 0;
  delta[file_bytes] += 0;
  for (const auto& pv : views) {
    rep.rank_bytes.push_back(pv.total_bytes);
    if (pv.total_bytes == 0) continue;
    for (const auto& r : view::enumerate_runs(pv.descriptor, 0, 0, pv.total_bytes)) {
      delta[r.file_offset] += 1;
      delta[r.file_offset + r.length] -= 1;
    }
  }
  std::int64_t depth = 0;
  for (auto it = delta.begin(); it != delta.end(); ++it) {
    depth += it->second;
    auto next = std::next(it);
    if (next == delta.end()) break;
    const std::int64_t b = it->first, e = next->first;
    const bool inside = b >= 0 && e <= file_bytes;
    if (!inside) {
      if (depth > 0) append_range(rep.overlaps, b, e);
    } else if (depth == 0) {
      append_range(rep.gaps, b, e);
    } else if (depth > 1) {
      append_range(rep.overlaps, b, e);
    }
  }
  return rep;
}

}  // namespace

std::int64_t RuntimeDescriptor::nprocs() const {
  return std::accumulate(grid.begin(), grid.end(), std::int64_t{1}, std::multiplies<>());
}

std::int64_t RuntimeDescriptor::total_bytes() const {
  std::int64_t n = elem_size;
  for (const auto& d : dims) n *= d.global_len;
  return n;
}

RuntimeDescriptor parse_runtime_descriptor(std::span<const std::int64_t> ints) {
  std::size_t pos = 0;
  auto next = [&]() -> std::int64_t {
    if (pos >= ints.size()) malformed("runtime descriptor truncated");
    return ints[pos++];
  };
  RuntimeDescriptor rd;
  const auto a = next();
  if (a < 1 || a > 16) malformed("grid rank out of range");
  for (std::int64_t i = 0; i < a; ++i) rd.grid.push_back(next());
  rd.type_code = next();
  rd.elem_size = next();
  const auto e = next();
  if (e < 1 || e > 16) malformed("data rank out of range");
  if (ints.size() != pos + static_cast<std::size_t>(4 * e)) malformed("runtime descriptor length mismatch");
  for (std::int64_t i = 0; i < e; ++i) {
    DimSpec d;
    d.global_len = next();
    d.local_len = next();
    d.kind = kind_from_code(next());
    d.arg = next();
    rd.dims.push_back(d);
  }
  validate(rd);
  return rd;
}

std::vector<std::int64_t> to_flat(const RuntimeDescriptor& rd) {
  std::vector<std::int64_t> out;
  out.push_back(static_cast<std::int64_t>(rd.grid.size()));
  out.insert(out.end(), rd.grid.begin(), rd.grid.end());
  out.push_back(rd.type_code);
  out.push_back(rd.elem_size);
  out.push_back(static_cast<std::int64_t>(rd.dims.size()));
  for (const auto& d : rd.dims) {
    out.push_back(d.global_len);
    out.push_back(d.local_len);
    out.push_back(static_cast<std::int64_t>(d.kind));
    out.push_back(d.arg);
  }
  return out;
}

namespace {

constexpr const char* kKindNames[] = {"none", "block", "cyclic", "gen_block", "indirect"};

}  // namespace

RuntimeDescriptor parse_runtime_descriptor_json(std::string_view text) {
  RuntimeDescriptor rd;
  try {
    auto j = nlohmann::json::parse(text);
    rd.grid = j.at("grid").get<std::vector<std::int64_t>>();
    rd.type_code = j.value("type_code", std::int64_t{0});
    rd.elem_size = j.at("elem_size").get<std::int64_t>();
    for (const auto& jd : j.at("dims")) {
      DimSpec d;
      d.global_len = jd.at("global").get<std::int64_t>();
      d.local_len = jd.at("local").get<std::int64_t>();
      const auto name = jd.at("dist").get<std::string>();
      auto it = std::find(std::begin(kKindNames), std::end(kKindNames), name);
      if (it == std::end(kKindNames)) malformed("unknown distribution '" + name + "'");
      d.kind = static_cast<Kind>(it - std::begin(kKindNames));
      d.arg = jd.value("arg", std::int64_t{0});
      rd.dims.push_back(d);
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  }
  validate(rd);
  return rd;
}

std::string to_json(const RuntimeDescriptor& rd) {
  nlohmann::json j;
  j["grid"] = rd.grid;
  j["type_code"] = rd.type_code;
  j["elem_size"] = rd.elem_size;
  j["dims"] = nlohmann::json::array();
  for (const auto& d : rd.dims) {
    j["dims"].push_back({{"global", d.global_len},
                         {"local", d.local_len},
                         {"dist", kKindNames[static_cast<std::size_t>(d.kind)]},
                         {"arg", d.arg}});
  }
  return j.dump();
}

std::vector<std::int64_t> rank_coords(const RuntimeDescriptor& rd, std::int64_t rank) {
  if (rank < 0 || rank >= rd.nprocs()) throw Error(Errc::rank_out_of_range);
  std::vector<std::int64_t> grid_coord(rd.grid.size());
  std::int64_t r = rank;
  for (std::size_t k = 0; k < rd.grid.size(); ++k) {
    grid_coord[k] = r % rd.grid[k];
    r /= rd.grid[k];
  }
  std::vector<std::int64_t> coords(rd.dims.size(), 0);
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    auto g = grid_dim_of(rd, i);
    if (g >= 0) coords[i] = grid_coord[static_cast<std::size_t>(g)];
  }
  return coords;
}

std::int64_t derived_local_len(const RuntimeDescriptor& rd, std::size_t dim, std::int64_t rank) {
  const auto& d = rd.dims.at(dim);
  const std::int64_t c = rank_coords(rd, rank)[dim];
  const std::int64_t p = procs_of(rd, dim);
  const std::int64_t g = d.global_len;
  switch (d.kind) {
    case Kind::none: return g;
    case Kind::block: return std::clamp<std::int64_t>(g - d.arg * c, 0, d.arg);
    case Kind::cyclic: {
      const std::int64_t nblocks = (g + d.arg - 1) / d.arg;
      if (c >= nblocks) return 0;
      const std::int64_t owned = (nblocks - c + p - 1) / p;
      std::int64_t len = owned * d.arg;
      const bool owns_last = (nblocks - 1) % p == c;
      if (owns_last && g % d.arg != 0) len -= d.arg - g % d.arg;
      return len;
    }
    default: throw Error(Errc::unsupported_distribution);
  }
}

RuntimeDescriptor for_rank(const RuntimeDescriptor& rd, std::int64_t rank) {
  validate(rd);
  RuntimeDescriptor out = rd;
  for (std::size_t i = 0; i < out.dims.size(); ++i) out.dims[i].local_len = derived_local_len(rd, i, rank);
  return out;
}

ProcessView build_process_view(const RuntimeDescriptor& rd, std::int64_t rank) {
  validate(rd);
  rank_coords(rd, rank);
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    const auto want = derived_local_len(rd, i, rank);
    if (rd.dims[i].local_len != want) {
      throw Error(Errc::local_length_mismatch, "dimension " + std::to_string(i + 1) + ": descriptor says " +
                                                   std::to_string(rd.dims[i].local_len) + ", rank owns " +
                                                   std::to_string(want));
    }
  }
  return make_view(rd, rank);
}

CoverReport cover_check(const RuntimeDescriptor& rd) {
  validate(rd);
  std::vector<ProcessView> views;
  for (std::int64_t r = 0; r < rd.nprocs(); ++r) views.push_back(make_view(for_rank(rd, r), r));
  return sweep(views, rd.total_bytes());
}

CoverReport cover_check(std::span<const RuntimeDescriptor> per_rank) {
  if (per_rank.empty()) return {};
  std::vector<ProcessView> views;
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    validate(per_rank[r]);
    views.push_back(make_view(per_rank[r], static_cast<std::int64_t>(r)));
  }
  return sweep(views, per_rank.front().total_bytes());
}

}  // namespace vipio::dist
