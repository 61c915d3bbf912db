#include "vipio/datatypes.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace vipio::dt {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::invalid_arguments, what); }

std::int64_t product(const std::vector<std::int64_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::int64_t{1}, std::multiplies<>());
}

struct BaseInfo {
  BaseKind kind;
  std::string_view name;
  std::int64_t extent;
};

// char/byte 1, short 2, int/float 4, long/double 8.
constexpr BaseInfo kBaseTable[] = {
    {BaseKind::byte_, "byte", 1},   {BaseKind::char_, "char", 1},     {BaseKind::short_, "short", 2},
    {BaseKind::int_, "int", 4},     {BaseKind::long_, "long", 8},     {BaseKind::ushort_, "ushort", 2},
    {BaseKind::uint_, "uint", 4},   {BaseKind::ulong_, "ulong", 8},   {BaseKind::float_, "float", 4},
    {BaseKind::double_, "double", 8},
};

const BaseInfo& info(BaseKind k) { return kBaseTable[static_cast<std::size_t>(k)]; }

}  // namespace

std::int64_t BaseType::extent() const { return info(kind).extent; }
std::string_view BaseType::name() const { return info(kind).name; }

std::optional<BaseType> BaseType::from_name(std::string_view name) {
  for (const auto& b : kBaseTable) {
    if (b.name == name) return BaseType{b.kind};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- construction

Datatype::Datatype(BaseType base) : rep_(std::make_shared<const Rep>(Rep{Base{base}, {}})) {}

Datatype Datatype::make(Node node, std::vector<Datatype> children) {
  return Datatype(std::make_shared<const Rep>(Rep{std::move(node), std::move(children)}));
}

Datatype Datatype::contiguous(std::int64_t count, Datatype child) {
  return make(Contiguous{count}, {std::move(child)});
}

Datatype Datatype::vector(std::int64_t count, std::int64_t blocklen, std::int64_t stride, Datatype child) {
  return make(Vector{count, blocklen, stride}, {std::move(child)});
}

Datatype Datatype::hvector(std::int64_t count, std::int64_t blocklen, std::int64_t stride_bytes, Datatype child) {
  return make(HVector{count, blocklen, stride_bytes}, {std::move(child)});
}

Datatype Datatype::indexed(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs, Datatype child) {
  return make(Indexed{std::move(blocklens), std::move(displs)}, {std::move(child)});
}

Datatype Datatype::hindexed(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs_bytes,
                            Datatype child) {
  return make(HIndexed{std::move(blocklens), std::move(displs_bytes)}, {std::move(child)});
}

Datatype Datatype::structure(std::vector<std::int64_t> blocklens, std::vector<std::int64_t> displs_bytes,
                             std::vector<Datatype> children, std::optional<std::int64_t> upper_bound) {
  return make(Struct{std::move(blocklens), std::move(displs_bytes), upper_bound}, std::move(children));
}

Datatype Datatype::subarray(std::vector<std::int64_t> sizes, std::vector<std::int64_t> subsizes,
                            std::vector<std::int64_t> starts, Order order, Datatype child) {
  return make(Subarray{std::move(sizes), std::move(subsizes), std::move(starts), order}, {std::move(child)});
}

Datatype Datatype::darray(std::int64_t size, std::int64_t rank, std::vector<std::int64_t> gsizes,
                          std::vector<DimDistribution> distribs, std::vector<std::int64_t> psizes, Order order,
                          Datatype child) {
  return make(Darray{size, rank, std::move(gsizes), std::move(distribs), std::move(psizes), order},
              {std::move(child)});
}

bool operator==(const Datatype& a, const Datatype& b) {
  return a.rep_ == b.rep_ || to_string(a) == to_string(b);
}

// ---------------------------------------------------------------- extent / size

std::int64_t Datatype::extent() const {
  const auto& kids = rep_->children;
  return std::visit(
      [&](const auto& n) -> std::int64_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Base>) {
          return n.type.extent();
        } else if constexpr (std::is_same_v<T, Contiguous>) {
          return n.count * kids[0].extent();
        } else if constexpr (std::is_same_v<T, Vector>) {
          if (n.count == 0) return 0;
          return ((n.count - 1) * n.stride_elems + n.blocklen) * kids[0].extent();
        } else if constexpr (std::is_same_v<T, HVector>) {
          if (n.count == 0) return 0;
          return (n.count - 1) * n.stride_bytes + n.blocklen * kids[0].extent();
        } else if constexpr (std::is_same_v<T, Indexed>) {
          std::int64_t hi = 0;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
            hi = std::max(hi, (n.displs_elems[i] + n.blocklens[i]) * kids[0].extent());
          }
          return hi;
        } else if constexpr (std::is_same_v<T, HIndexed>) {
          std::int64_t hi = 0;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
            hi = std::max(hi, n.displs_bytes[i] + n.blocklens[i] * kids[0].extent());
          }
          return hi;
        } else if constexpr (std::is_same_v<T, Struct>) {
          if (n.upper_bound) return *n.upper_bound;
          std::int64_t hi = 0;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i) {
            hi = std::max(hi, n.displs_bytes[i] + n.blocklens[i] * kids[i].extent());
          }
          return hi;
        } else if constexpr (std::is_same_v<T, Subarray>) {
          return product(n.sizes) * kids[0].extent();
        } else {
          return product(n.gsizes) * kids[0].extent();
        }
      },
      rep_->node);
}

std::int64_t Datatype::size() const {
  const auto& kids = rep_->children;
  return std::visit(
      [&](const auto& n) -> std::int64_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Base>) {
          return n.type.extent();
        } else if constexpr (std::is_same_v<T, Contiguous>) {
          return n.count * kids[0].size();
        } else if constexpr (std::is_same_v<T, Vector> || std::is_same_v<T, HVector>) {
          return n.count * n.blocklen * kids[0].size();
        } else if constexpr (std::is_same_v<T, Indexed> || std::is_same_v<T, HIndexed>) {
          return std::accumulate(n.blocklens.begin(), n.blocklens.end(), std::int64_t{0}) * kids[0].size();
        } else if constexpr (std::is_same_v<T, Struct>) {
          std::int64_t total = 0;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i) total += n.blocklens[i] * kids[i].size();
          return total;
        } else if constexpr (std::is_same_v<T, Subarray>) {
          return product(n.subsizes) * kids[0].size();
        } else {
          auto coords = grid_coords(n.rank, n.psizes);
          std::int64_t elems = 1;
          for (std::size_t d = 0; d < n.gsizes.size(); ++d) {
            elems *= darray_block_params(n.distribs[d], n.gsizes[d], n.psizes[d], coords[d]).my_size;
          }
          return elems * kids[0].size();
        }
      },
      rep_->node);
}

// ---------------------------------------------------------------- element type

namespace {

void collect_leaves(const Datatype& t, std::vector<BaseType>& out) {
  if (t.is_base()) {
    out.push_back(t.base());
    return;
  }
  for (const auto& c : t.children()) collect_leaves(c, out);
}

}  // namespace

BaseType element_type_of(const Datatype& t, bool require_homogeneous) {
  std::vector<BaseType> leaves;
  collect_leaves(t, leaves);
  if (leaves.empty()) invalid("datatype without leaves");
  if (require_homogeneous) {
    for (const auto& b : leaves) {
      if (b != leaves.front()) throw Error(Errc::heterogeneous_leaves, to_string(t));
    }
  }
  return leaves.front();
}

// ---------------------------------------------------------------- validation

namespace {

void check_ordered_blocks(const std::vector<std::int64_t>& blocklens, const std::vector<std::int64_t>& displs,
                          const std::vector<std::int64_t>& child_extents, const char* what) {
  if (blocklens.size() != displs.size()) invalid(std::string(what) + ": blocklens/displacements length differ");
  for (std::size_t i = 0; i < blocklens.size(); ++i) {
    if (blocklens[i] < 1) invalid(std::string(what) + ": blocklen < 1");
    if (i == 0) {
      if (displs[0] < 0) invalid(std::string(what) + ": negative first displacement");
    } else if (displs[i] - blocklens[i - 1] * child_extents[i - 1] - displs[i - 1] < 0) {
      invalid(std::string(what) + ": blocks must be ascending and non-overlapping");
    }
  }
}

}  // namespace

void validate(const Datatype& t) {
  for (const auto& c : t.children()) validate(c);
  const auto& kids = t.children();
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Contiguous>) {
          if (n.count < 1) invalid("contiguous: count < 1");
        } else if constexpr (std::is_same_v<T, Vector>) {
          if (n.count < 1 || n.blocklen < 1) invalid("vector: count/blocklen < 1");
          if (n.count > 1 && n.stride_elems < n.blocklen) invalid("vector: stride < blocklen");
        } else if constexpr (std::is_same_v<T, HVector>) {
          if (n.count < 1 || n.blocklen < 1) invalid("hvector: count/blocklen < 1");
          if (n.count > 1 && n.stride_bytes < n.blocklen * kids[0].extent()) invalid("hvector: stride < block");
        } else if constexpr (std::is_same_v<T, Indexed>) {
          if (n.blocklens.empty()) invalid("indexed: no blocks");
          std::vector<std::int64_t> displs;
          for (auto d : n.displs_elems) displs.push_back(d * kids[0].extent());
          check_ordered_blocks(n.blocklens, displs, std::vector<std::int64_t>(n.blocklens.size(), kids[0].extent()),
                               "indexed");
        } else if constexpr (std::is_same_v<T, HIndexed>) {
          if (n.blocklens.empty()) invalid("hindexed: no blocks");
          check_ordered_blocks(n.blocklens, n.displs_bytes,
                               std::vector<std::int64_t>(n.blocklens.size(), kids[0].extent()), "hindexed");
        } else if constexpr (std::is_same_v<T, Struct>) {
          if (n.blocklens.size() != kids.size()) invalid("struct: one child per block");
          if (n.blocklens.empty() && !n.upper_bound) invalid("struct: no blocks");
          std::vector<std::int64_t> exts;
          for (const auto& c : kids) exts.push_back(c.extent());
          check_ordered_blocks(n.blocklens, n.displs_bytes, exts, "struct");
          if (n.upper_bound) {
            for (std::size_t i = 0; i < kids.size(); ++i) {
              if (n.displs_bytes[i] + n.blocklens[i] * exts[i] > *n.upper_bound) invalid("struct: block beyond ub");
            }
          }
        } else if constexpr (std::is_same_v<T, Subarray>) {
          const auto nd = n.sizes.size();
          if (nd < 1 || n.subsizes.size() != nd || n.starts.size() != nd) invalid("subarray: dimension mismatch");
          for (std::size_t i = 0; i < nd; ++i) {
            if (n.sizes[i] < 1 || n.subsizes[i] < 1) invalid("subarray: sizes must be >= 1");
            if (n.subsizes[i] > n.sizes[i]) invalid("subarray: subsize exceeds size");
            if (n.starts[i] < 0 || n.starts[i] > n.sizes[i] - n.subsizes[i]) invalid("subarray: start out of range");
          }
        } else if constexpr (std::is_same_v<T, Darray>) {
          const auto nd = n.gsizes.size();
          if (nd < 1 || n.distribs.size() != nd || n.psizes.size() != nd) invalid("darray: dimension mismatch");
          if (n.size < 1) invalid("darray: size < 1");
          if (n.rank < 0 || n.rank >= n.size) throw Error(Errc::rank_out_of_range);
          if (product(n.psizes) != n.size) invalid("darray: product(psizes) != size");
          for (std::size_t i = 0; i < nd; ++i) {
            if (n.gsizes[i] < 1 || n.psizes[i] < 1) invalid("darray: sizes must be >= 1");
            const auto& d = n.distribs[i];
            if (d.mode == DargMode::value) {
              if (d.darg < 1) invalid("darray: darg < 1");
              if (d.kind == DistKind::block && d.darg * n.psizes[i] < n.gsizes[i]) {
                invalid("darray: darg * psize < gsize");
              }
            }
          }
        }
      },
      t.node());
}

// ---------------------------------------------------------------- grid / blocks

std::vector<std::int64_t> grid_coords(std::int64_t rank, const std::vector<std::int64_t>& psizes) {
  std::int64_t procs = product(psizes);
  if (rank < 0 || rank >= procs) throw Error(Errc::rank_out_of_range);
  std::vector<std::int64_t> coords(psizes.size());
  std::int64_t tmp_rank = rank;
  for (std::size_t i = 0; i < psizes.size(); ++i) {
    procs = procs / psizes[i];
    coords[i] = tmp_rank / procs;
    tmp_rank = tmp_rank % procs;
  }
  return coords;
}

DimBlockParams darray_block_params(const DimDistribution& dist, std::int64_t gsize, std::int64_t nprocs,
                                   std::int64_t coord) {
  if (gsize < 1 || nprocs < 1 || coord < 0 || coord >= nprocs) invalid("darray dimension parameters");
  if (dist.mode == DargMode::value && dist.darg < 1) invalid("darg < 1");
  DimBlockParams p;
  switch (dist.kind) {
    case DistKind::none:
      p.blksize = gsize;
      p.count = 1;
      p.my_size = gsize;
      p.start_offset = 0;
      return p;
    case DistKind::block: {
      p.blksize = dist.mode == DargMode::default_darg ? (gsize + nprocs - 1) / nprocs : dist.darg;
      if (p.blksize * nprocs < gsize) invalid("darg * nprocs < gsize");
      const std::int64_t j = gsize - p.blksize * coord;
      p.my_size = std::max<std::int64_t>(0, std::min(p.blksize, j));
      p.count = p.my_size > 0 ? 1 : 0;
      p.start_offset = p.blksize * coord;
      return p;
    }
    case DistKind::cyclic: {
      p.blksize = dist.mode == DargMode::default_darg ? 1 : dist.darg;
      const std::int64_t nblocks = (gsize + p.blksize - 1) / p.blksize;
      p.count = nblocks / nprocs;
      const std::int64_t left_over = nblocks - p.count * nprocs;
      if (coord < left_over) p.count += 1;
      const std::int64_t remaining = gsize % (nprocs * p.blksize);
      if (remaining != 0) {
        const std::int64_t last = remaining - p.blksize * coord;
        if (last < p.blksize && last > 0) {
          p.count -= 1;
          p.last_blksize = last;
        }
      }
      p.my_size = p.count * p.blksize + p.last_blksize;
      p.start_offset = p.blksize * coord;
      return p;
    }
  }
  invalid("unknown distribution");
}

// ---------------------------------------------------------------- normalize

namespace {

Datatype lower_subarray(const Subarray& s, const Datatype& elem) {
  // Fortran order is the C algorithm on mirrored dimensions.
  std::vector<std::int64_t> sizes = s.sizes, subsizes = s.subsizes, starts = s.starts;
  if (s.order == Order::fortran) {
    std::reverse(sizes.begin(), sizes.end());
    std::reverse(subsizes.begin(), subsizes.end());
    std::reverse(starts.begin(), starts.end());
  }
  const auto nd = static_cast<std::ptrdiff_t>(sizes.size());
  const std::int64_t extent = elem.extent();
  Datatype tmp = elem;
  if (nd == 1) {
    tmp = normalize(Datatype::contiguous(subsizes[0], elem));
  } else {
    tmp = normalize(Datatype::vector(subsizes[nd - 2], subsizes[nd - 1], sizes[nd - 1], elem));
    std::int64_t size = sizes[nd - 1] * extent;
    for (auto i = nd - 3; i >= 0; --i) {
      size *= sizes[i + 1];
      tmp = normalize(Datatype::hvector(subsizes[i], 1, size, tmp));
    }
  }
  std::int64_t disp = starts[nd - 1];
  std::int64_t size = 1;
  for (auto i = nd - 2; i >= 0; --i) {
    size *= sizes[i + 1];
    disp += size * starts[i];
  }
  disp *= extent;
  const std::int64_t ub = extent * product(sizes);
  return Datatype::structure({1}, {disp}, {tmp}, ub);
}

std::optional<Datatype> lower_darray_dim(const DimDistribution& dist, std::int64_t gsize, std::int64_t nprocs,
                                         std::int64_t coord, bool innermost, std::int64_t row_stride,
                                         const Datatype& type_old, std::int64_t& st_offset) {
  const auto p = darray_block_params(dist, gsize, nprocs, coord);
  st_offset = p.start_offset;
  if (p.my_size == 0) return std::nullopt;

  if (dist.kind != DistKind::cyclic) {
    if (innermost) return normalize(Datatype::contiguous(p.my_size, type_old));
    return normalize(Datatype::hvector(p.my_size, 1, row_stride, type_old));
  }

  const std::int64_t stride = nprocs * p.blksize * row_stride;
  std::optional<Datatype> regular;
  if (p.count > 0) {
    if (innermost) {
      regular = normalize(Datatype::hvector(p.count, p.blksize, stride, type_old));
    } else {
      auto sub_block = normalize(Datatype::hvector(p.blksize, 1, row_stride, type_old));
      regular = normalize(Datatype::hvector(p.count, 1, stride, sub_block));
    }
  }
  if (p.last_blksize == 0) return regular;

  Datatype irregular = innermost ? normalize(Datatype::contiguous(p.last_blksize, type_old))
                                 : normalize(Datatype::hvector(p.last_blksize, 1, row_stride, type_old));
  if (!regular) return irregular;
  return Datatype::structure({1, 1}, {0, p.count * stride}, {*regular, irregular});
}

Datatype lower_darray(const Darray& d, const Datatype& elem) {
  // The process grid is always row-major; only the array layout mirrors.
  std::vector<std::int64_t> coords = grid_coords(d.rank, d.psizes);
  std::vector<std::int64_t> gsizes = d.gsizes, psizes = d.psizes;
  std::vector<DimDistribution> distribs = d.distribs;
  if (d.order == Order::fortran) {
    std::reverse(coords.begin(), coords.end());
    std::reverse(gsizes.begin(), gsizes.end());
    std::reverse(psizes.begin(), psizes.end());
    std::reverse(distribs.begin(), distribs.end());
  }
  const auto nd = static_cast<std::ptrdiff_t>(gsizes.size());
  const std::int64_t extent = elem.extent();
  const std::int64_t ub = extent * product(gsizes);

  std::optional<Datatype> type_old = elem;
  std::int64_t disp = 0;
  std::int64_t row_stride = extent;
  for (auto i = nd - 1; i >= 0; --i) {
    std::int64_t st_offset = 0;
    auto type_new = lower_darray_dim(distribs[i], gsizes[i], psizes[i], coords[i], i == nd - 1, row_stride,
                                     *type_old, st_offset);
    if (!type_new) return Datatype::structure({}, {}, {}, ub);
    disp += st_offset * row_stride;
    row_stride *= gsizes[i];
    type_old = std::move(type_new);
  }
  return Datatype::structure({1}, {disp}, {*type_old}, ub);
}

}  // namespace

Datatype normalize(const Datatype& t) {
  validate(t);
  const auto& kids = t.children();
  return std::visit(
      [&](const auto& n) -> Datatype {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Base>) {
          return t;
        } else if constexpr (std::is_same_v<T, Contiguous>) {
          return Datatype::contiguous(n.count, normalize(kids[0]));
        } else if constexpr (std::is_same_v<T, Vector>) {
          auto c = normalize(kids[0]);
          if (n.count == 1 || n.blocklen == n.stride_elems) return Datatype::contiguous(n.count * n.blocklen, c);
          return Datatype::hvector(n.count, n.blocklen, n.stride_elems * c.extent(), c);
        } else if constexpr (std::is_same_v<T, HVector>) {
          auto c = normalize(kids[0]);
          if (n.count == 1 || n.stride_bytes == n.blocklen * c.extent()) {
            return Datatype::contiguous(n.count * n.blocklen, c);
          }
          return Datatype::hvector(n.count, n.blocklen, n.stride_bytes, c);
        } else if constexpr (std::is_same_v<T, Indexed>) {
          auto c = normalize(kids[0]);
          std::vector<std::int64_t> displs;
          for (auto d : n.displs_elems) displs.push_back(d * c.extent());
          return Datatype::hindexed(n.blocklens, std::move(displs), c);
        } else if constexpr (std::is_same_v<T, HIndexed>) {
          return Datatype::hindexed(n.blocklens, n.displs_bytes, normalize(kids[0]));
        } else if constexpr (std::is_same_v<T, Struct>) {
          std::vector<Datatype> cs;
          for (const auto& k : kids) cs.push_back(normalize(k));
          return Datatype::structure(n.blocklens, n.displs_bytes, std::move(cs), n.upper_bound);
        } else if constexpr (std::is_same_v<T, Subarray>) {
          return lower_subarray(n, normalize(kids[0]));
        } else {
          return lower_darray(n, normalize(kids[0]));
        }
      },
      t.node());
}

// ---------------------------------------------------------------- text form

namespace {

void put_list(std::ostream& os, const std::vector<std::int64_t>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
}

void put_dist(std::ostream& os, const DimDistribution& d) {
  switch (d.kind) {
    case DistKind::none: os << "none"; return;
    case DistKind::block: os << "block"; break;
    case DistKind::cyclic: os << "cyclic"; break;
  }
  if (d.mode == DargMode::value) os << '(' << d.darg << ')';
}

void put(std::ostream& os, const Datatype& t) {
  const auto& kids = t.children();
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Base>) {
          os << n.type.name();
          return;
        } else if constexpr (std::is_same_v<T, Contiguous>) {
          os << "contiguous(" << n.count;
        } else if constexpr (std::is_same_v<T, Vector>) {
          os << "vector(" << n.count << ',' << n.blocklen << ',' << n.stride_elems;
        } else if constexpr (std::is_same_v<T, HVector>) {
          os << "hvector(" << n.count << ',' << n.blocklen << ',' << n.stride_bytes;
        } else if constexpr (std::is_same_v<T, Indexed>) {
          os << "indexed(";
          put_list(os, n.blocklens);
          os << ',';
          put_list(os, n.displs_elems);
        } else if constexpr (std::is_same_v<T, HIndexed>) {
          os << "hindexed(";
          put_list(os, n.blocklens);
          os << ',';
          put_list(os, n.displs_bytes);
        } else if constexpr (std::is_same_v<T, Struct>) {
          os << "struct(";
          put_list(os, n.blocklens);
          os << ',';
          put_list(os, n.displs_bytes);
          if (n.upper_bound) os << ",ub=" << *n.upper_bound;
        } else if constexpr (std::is_same_v<T, Subarray>) {
          os << "subarray(";
          put_list(os, n.sizes);
          os << ',';
          put_list(os, n.subsizes);
          os << ',';
          put_list(os, n.starts);
          os << ',' << (n.order == Order::c ? 'C' : 'F');
        } else {
          os << "darray(size=" << n.size << ",rank=" << n.rank << ',';
          put_list(os, n.gsizes);
          os << ",[";
          for (std::size_t i = 0; i < n.distribs.size(); ++i) {
            if (i) os << ',';
            put_dist(os, n.distribs[i]);
          }
          os << "],";
          put_list(os, n.psizes);
          os << ',' << (n.order == Order::c ? 'C' : 'F');
        }
        os << ';';
        for (std::size_t i = 0; i < kids.size(); ++i) {
          if (i) os << ',';
          put(os, kids[i]);
        }
        os << ')';
      },
      t.node());
}

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Datatype parse_all() {
    auto t = type();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::invalid_arguments, "datatype text at " + std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string ident() {
    skip_ws();
    std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalpha(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::int64_t integer() {
    skip_ws();
    std::size_t start = pos_;
    if (pos_ < s_.size() && s_[pos_] == '-') ++pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_ || (pos_ == start + 1 && s_[start] == '-')) fail("expected integer");
    return std::stoll(std::string(s_.substr(start, pos_ - start)));
  }

  std::vector<std::int64_t> list() {
    expect('[');
    std::vector<std::int64_t> out;
    if (peek(']')) {
      ++pos_;
      return out;
    }
    do {
      out.push_back(integer());
    } while (peek(',') && ++pos_);
    expect(']');
    return out;
  }

  Order order() {
    auto id = ident();
    if (id == "C") return Order::c;
    if (id == "F") return Order::fortran;
    fail("expected C or F");
  }

  DimDistribution dist() {
    auto id = ident();
    DimDistribution d;
    if (id == "none") return d;
    if (id == "block") {
      d.kind = DistKind::block;
    } else if (id == "cyclic") {
      d.kind = DistKind::cyclic;
    } else {
      fail("unknown distribution '" + id + "'");
    }
    if (peek('(')) {
      ++pos_;
      d.mode = DargMode::value;
      d.darg = integer();
      expect(')');
    }
    return d;
  }

  void keyword(const char* kw) {
    if (ident() != kw) fail(std::string("expected ") + kw);
    expect('=');
  }

  Datatype type() {
    auto name = ident();
    if (auto b = BaseType::from_name(name)) return Datatype(*b);
    expect('(');
    Datatype out = kByte;
    if (name == "contiguous") {
      auto n = integer();
      expect(';');
      out = Datatype::contiguous(n, type());
    } else if (name == "vector" || name == "hvector") {
      auto c = integer();
      expect(',');
      auto b = integer();
      expect(',');
      auto st = integer();
      expect(';');
      out = name == "vector" ? Datatype::vector(c, b, st, type()) : Datatype::hvector(c, b, st, type());
    } else if (name == "indexed" || name == "hindexed") {
      auto bl = list();
      expect(',');
      auto ds = list();
      expect(';');
      out = name == "indexed" ? Datatype::indexed(bl, ds, type()) : Datatype::hindexed(bl, ds, type());
    } else if (name == "struct") {
      auto bl = list();
      expect(',');
      auto ds = list();
      std::optional<std::int64_t> ub;
      if (peek(',')) {
        ++pos_;
        keyword("ub");
        ub = integer();
      }
      expect(';');
      std::vector<Datatype> kids;
      if (!peek(')')) {
        do {
          kids.push_back(type());
        } while (peek(',') && ++pos_);
      }
      out = Datatype::structure(bl, ds, std::move(kids), ub);
    } else if (name == "subarray") {
      auto sizes = list();
      expect(',');
      auto subsizes = list();
      expect(',');
      auto starts = list();
      expect(',');
      auto ord = order();
      expect(';');
      out = Datatype::subarray(sizes, subsizes, starts, ord, type());
    } else if (name == "darray") {
      keyword("size");
      auto size = integer();
      expect(',');
      keyword("rank");
      auto rank = integer();
      expect(',');
      auto gs = list();
      expect(',');
      expect('[');
      std::vector<DimDistribution> ds;
      do {
        ds.push_back(dist());
      } while (peek(',') && ++pos_);
      expect(']');
      expect(',');
      auto ps = list();
      expect(',');
      auto ord = order();
      expect(';');
      out = Datatype::darray(size, rank, gs, ds, ps, ord, type());
    } else {
      fail("unknown constructor '" + name + "'");
    }
    expect(')');
    return out;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const Datatype& t) {
  std::ostringstream os;
  put(os, t);
  return os.str();
}

Datatype parse_datatype(std::string_view text) {
  auto t = Parser(text).parse_all();
  validate(t);
  return t;
}

}  // namespace vipio::dt
