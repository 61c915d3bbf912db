#pragma once

// Brute-force reference computations used by the tests. Nothing here calls
// normalize() or the descriptor engine; every value is derived directly from
// the constructor definitions.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "vipio/datatypes.hpp"

namespace vipio::oracle {

using dt::Datatype;
using Offsets = std::vector<std::int64_t>;

inline std::int64_t prod(const std::vector<std::int64_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::int64_t extent(const Datatype& t);

// Multi-index iteration in row-major order over `dims`.
template <class F>
void for_each_index(const std::vector<std::int64_t>& dims, F&& f) {
  std::vector<std::int64_t> idx(dims.size(), 0);
  if (prod(dims) == 0) return;
  while (true) {
    f(idx);
    std::size_t d = dims.size();
    while (d > 0) {
      --d;
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
      if (d == 0) return;
    }
  }
}

// Linear element index of `idx` in an array of `dims` with the given order.
inline std::int64_t linear(const std::vector<std::int64_t>& idx, const std::vector<std::int64_t>& dims,
                           dt::Order order) {
  std::int64_t lin = 0;
  if (order == dt::Order::c) {
    for (std::size_t d = 0; d < dims.size(); ++d) lin = lin * dims[d] + idx[d];
  } else {
    for (std::size_t d = dims.size(); d-- > 0;) lin = lin * dims[d] + idx[d];
  }
  return lin;
}

// Which process coordinate owns global index i of one dimension.
inline std::int64_t owner(const dt::DimDistribution& dist, std::int64_t g, std::int64_t p, std::int64_t i) {
  switch (dist.kind) {
    case dt::DistKind::none: return 0;
    case dt::DistKind::block: {
      std::int64_t blk = dist.mode == dt::DargMode::value ? dist.darg : (g + p - 1) / p;
      return i / blk;
    }
    case dt::DistKind::cyclic: {
      std::int64_t blk = dist.mode == dt::DargMode::value ? dist.darg : 1;
      return (i / blk) % p;
    }
  }
  return -1;
}

// Row-major grid coordinates, computed by repeated division from the back.
inline std::vector<std::int64_t> coords_of(std::int64_t rank, const std::vector<std::int64_t>& psizes) {
  std::vector<std::int64_t> c(psizes.size());
  for (std::size_t d = psizes.size(); d-- > 0;) {
    c[d] = rank % psizes[d];
    rank /= psizes[d];
  }
  return c;
}

// Sorted absolute byte offsets of every accessible byte of one instance.
inline Offsets bytes(const Datatype& t) {
  Offsets out;
  const auto& kids = t.children();
  auto place = [&](const Datatype& child, std::int64_t at) {
    for (auto b : bytes(child)) out.push_back(at + b);
  };
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dt::Base>) {
          for (std::int64_t i = 0; i < n.type.extent(); ++i) out.push_back(i);
        } else if constexpr (std::is_same_v<T, dt::Contiguous>) {
          for (std::int64_t i = 0; i < n.count; ++i) place(kids[0], i * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::Vector>) {
          for (std::int64_t i = 0; i < n.count; ++i)
            for (std::int64_t j = 0; j < n.blocklen; ++j)
              place(kids[0], (i * n.stride_elems + j) * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::HVector>) {
          for (std::int64_t i = 0; i < n.count; ++i)
            for (std::int64_t j = 0; j < n.blocklen; ++j)
              place(kids[0], i * n.stride_bytes + j * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::Indexed>) {
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            for (std::int64_t j = 0; j < n.blocklens[i]; ++j)
              place(kids[0], (n.displs_elems[i] + j) * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::HIndexed>) {
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            for (std::int64_t j = 0; j < n.blocklens[i]; ++j)
              place(kids[0], n.displs_bytes[i] + j * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::Struct>) {
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            for (std::int64_t j = 0; j < n.blocklens[i]; ++j)
              place(kids[i], n.displs_bytes[i] + j * extent(kids[i]));
        } else if constexpr (std::is_same_v<T, dt::Subarray>) {
          const auto e = extent(kids[0]);
          for_each_index(n.subsizes, [&](const std::vector<std::int64_t>& sub) {
            std::vector<std::int64_t> idx(sub.size());
            for (std::size_t d = 0; d < sub.size(); ++d) idx[d] = sub[d] + n.starts[d];
            place(kids[0], linear(idx, n.sizes, n.order) * e);
          });
        } else {
          const auto e = extent(kids[0]);
          const auto me = coords_of(n.rank, n.psizes);
          for_each_index(n.gsizes, [&](const std::vector<std::int64_t>& idx) {
            for (std::size_t d = 0; d < idx.size(); ++d) {
              if (owner(n.distribs[d], n.gsizes[d], n.psizes[d], idx[d]) != me[d]) return;
            }
            place(kids[0], linear(idx, n.gsizes, n.order) * e);
          });
        }
      },
      t.node());
  std::sort(out.begin(), out.end());
  return out;
}

// Upper bound of one instance: the end of its farthest block, where a block
// spans blocklen full child extents.
inline std::int64_t extent(const Datatype& t) {
  const auto& kids = t.children();
  return std::visit(
      [&](const auto& n) -> std::int64_t {
        using T = std::decay_t<decltype(n)>;
        std::int64_t ub = 0;
        if constexpr (std::is_same_v<T, dt::Base>) {
          ub = n.type.extent();
        } else if constexpr (std::is_same_v<T, dt::Contiguous>) {
          ub = n.count * extent(kids[0]);
        } else if constexpr (std::is_same_v<T, dt::Vector>) {
          for (std::int64_t i = 0; i < n.count; ++i)
            ub = std::max(ub, (i * n.stride_elems + n.blocklen) * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::HVector>) {
          for (std::int64_t i = 0; i < n.count; ++i)
            ub = std::max(ub, i * n.stride_bytes + n.blocklen * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::Indexed>) {
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            ub = std::max(ub, (n.displs_elems[i] + n.blocklens[i]) * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::HIndexed>) {
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            ub = std::max(ub, n.displs_bytes[i] + n.blocklens[i] * extent(kids[0]));
        } else if constexpr (std::is_same_v<T, dt::Struct>) {
          if (n.upper_bound) return *n.upper_bound;
          for (std::size_t i = 0; i < n.blocklens.size(); ++i)
            ub = std::max(ub, n.displs_bytes[i] + n.blocklens[i] * extent(kids[i]));
        } else if constexpr (std::is_same_v<T, dt::Subarray>) {
          ub = prod(n.sizes) * extent(kids[0]);
        } else {
          ub = prod(n.gsizes) * extent(kids[0]);
        }
        return ub;
      },
      t.node());
}

// Accessible bytes of a view tiled from `disp` that lie below `limit`, in
// view order. The tiling covers enough periods to reach `limit`.
inline Offsets view_bytes(const Datatype& filetype, std::int64_t disp, std::int64_t limit) {
  Offsets out;
  const auto period = bytes(filetype);
  const auto ext = extent(filetype);
  if (period.empty() || ext == 0) return out;
  for (std::int64_t k = 0; disp + k * ext < limit; ++k) {
    for (auto b : period) {
      const auto a = disp + k * ext + b;
      if (a < limit) out.push_back(a);
    }
  }
  return out;
}

// Random well-formed datatype trees, depth <= max_depth, counts and block
// lengths <= 6, strides <= 64.
class TreeGen {
 public:
  explicit TreeGen(std::uint64_t seed) : rng_(seed) {}

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }

  dt::BaseType base() {
    static const dt::BaseType kinds[] = {dt::kByte, dt::kChar, dt::kShort, dt::kInt, dt::kDouble};
    return kinds[uniform(0, 4)];
  }

  Datatype tree(int max_depth, dt::BaseType leaf) {
    if (max_depth == 0) return leaf;
    auto child = [&] { return tree(max_depth - 1, leaf); };
    switch (uniform(0, 7)) {
      case 0: return Datatype::contiguous(uniform(1, 6), child());
      case 1: {
        auto bl = uniform(1, 6);
        return Datatype::vector(uniform(1, 6), bl, uniform(bl, std::max<std::int64_t>(bl, 12)), child());
      }
      case 2: {
        auto c = child();
        auto bl = uniform(1, 6);
        auto lo = bl * c.extent();
        return Datatype::hvector(uniform(1, 6), bl, uniform(lo, std::max<std::int64_t>(lo, 64)), c);
      }
      case 3: {
        auto n = uniform(1, 4);
        std::vector<std::int64_t> bl, ds;
        std::int64_t at = uniform(0, 3);
        for (std::int64_t i = 0; i < n; ++i) {
          bl.push_back(uniform(1, 6));
          ds.push_back(at);
          at += bl.back() + uniform(0, 4);
        }
        return Datatype::indexed(bl, ds, child());
      }
      case 4: {
        auto c = child();
        auto n = uniform(1, 4);
        std::vector<std::int64_t> bl, ds;
        std::int64_t at = uniform(0, 8);
        for (std::int64_t i = 0; i < n; ++i) {
          bl.push_back(uniform(1, 6));
          ds.push_back(at);
          at += bl.back() * c.extent() + uniform(0, 16);
        }
        return Datatype::hindexed(bl, ds, c);
      }
      case 5: {
        auto n = uniform(1, 3);
        std::vector<std::int64_t> bl, ds;
        std::vector<Datatype> kids;
        std::int64_t at = uniform(0, 8);
        for (std::int64_t i = 0; i < n; ++i) {
          kids.push_back(child());
          bl.push_back(uniform(1, 4));
          ds.push_back(at);
          at += bl.back() * kids.back().extent() + uniform(0, 16);
        }
        std::optional<std::int64_t> ub;
        if (uniform(0, 2) == 0) ub = at + uniform(0, 16);
        return Datatype::structure(bl, ds, kids, ub);
      }
      case 6: {
        auto nd = uniform(1, 3);
        std::vector<std::int64_t> sizes, subs, starts;
        for (std::int64_t d = 0; d < nd; ++d) {
          sizes.push_back(uniform(1, 6));
          subs.push_back(uniform(1, sizes.back()));
          starts.push_back(uniform(0, sizes.back() - subs.back()));
        }
        return Datatype::subarray(sizes, subs, starts, uniform(0, 1) ? dt::Order::c : dt::Order::fortran, child());
      }
      default: {
        auto nd = uniform(1, 2);
        std::vector<std::int64_t> gs, ps;
        std::vector<dt::DimDistribution> dist;
        for (std::int64_t d = 0; d < nd; ++d) {
          gs.push_back(uniform(1, 8));
          ps.push_back(uniform(1, 3));
          switch (uniform(0, 4)) {
            case 0: dist.push_back(dt::DimDistribution::block()); break;
            case 1: dist.push_back(dt::DimDistribution::block((gs.back() + ps.back() - 1) / ps.back() + uniform(0, 2))); break;
            case 2: dist.push_back(dt::DimDistribution::cyclic()); break;
            case 3: dist.push_back(dt::DimDistribution::cyclic(uniform(1, 3))); break;
            default: dist.push_back(dt::DimDistribution::none()); ps.back() = 1; break;
          }
        }
        auto size = prod(ps);
        return Datatype::darray(size, uniform(0, size - 1), gs, dist, ps,
                                uniform(0, 1) ? dt::Order::c : dt::Order::fortran, child());
      }
    }
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace vipio::oracle
