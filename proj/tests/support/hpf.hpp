#pragma once

// HPF element-assignment oracle for runtime descriptors.

#include <random>
#include <vector>

#include "vipio/distribution.hpp"

namespace vipio::oracle {

// Element-by-element HPF assignment: the byte offsets of every element the
// rank owns, computed straight from the index tuples.
inline std::vector<std::int64_t> assigned_bytes(const dist::RuntimeDescriptor& rd, std::int64_t rank) {
  // Column-major rank -> grid coordinates, then map grid dims onto data dims.
  std::vector<std::int64_t> gc;
  for (auto b : rd.grid) {
    gc.push_back(rank % b);
    rank /= b;
  }
  std::vector<std::int64_t> coord(rd.dims.size(), 0), procs(rd.dims.size(), 1);
  std::size_t next = 0;
  for (std::size_t i = 0; i < rd.dims.size(); ++i) {
    if (rd.grid.size() == rd.dims.size()) {
      coord[i] = gc[i];
      procs[i] = rd.grid[i];
    } else if (rd.dims[i].kind != dist::Kind::none) {
      coord[i] = gc[next];
      procs[i] = rd.grid[next];
      ++next;
    }
  }
  std::vector<std::int64_t> out;
  std::int64_t total = 1;
  for (const auto& d : rd.dims) total *= d.global_len;
  for (std::int64_t lin = 0; lin < total; ++lin) {
    std::int64_t rest = lin;
    bool mine = true;
    for (std::size_t i = 0; i < rd.dims.size(); ++i) {
      const auto& d = rd.dims[i];
      const std::int64_t idx = rest % d.global_len;
      rest /= d.global_len;
      std::int64_t who = 0;
      if (d.kind == dist::Kind::block) who = idx / d.arg;
      if (d.kind == dist::Kind::cyclic) who = (idx / d.arg) % procs[i];
      if (d.kind != dist::Kind::none && who != coord[i]) mine = false;
    }
    if (mine) {
      for (std::int64_t b = 0; b < rd.elem_size; ++b) out.push_back(lin * rd.elem_size + b);
    }
  }
  return out;
}

// Random BLOCK/CYCLIC/undistributed descriptors of rank 1..3.
inline dist::RuntimeDescriptor random_descriptor(std::mt19937_64& rng) {
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  dist::RuntimeDescriptor rd;
  rd.elem_size = std::vector<std::int64_t>{1, 2, 4, 8}[static_cast<std::size_t>(pick(0, 3))];
  const auto nd = pick(1, 3);
  for (std::int64_t i = 0; i < nd; ++i) {
    dist::DimSpec d;
    d.global_len = pick(1, 24);
    const auto p = nd == 1 ? pick(1, 4) : (i == 0 ? pick(1, 3) : pick(1, 4));
    rd.grid.push_back(p);
    switch (pick(0, 2)) {
      case 0:
        d.kind = dist::Kind::none;
        rd.grid.back() = 1;
        break;
      case 1:
        d.kind = dist::Kind::block;
        d.arg = (d.global_len + p - 1) / p + pick(0, 2);
        break;
      default:
        d.kind = dist::Kind::cyclic;
        d.arg = pick(1, 5);
        break;
    }
    rd.dims.push_back(d);
  }
  return rd;
}

}  // namespace vipio::oracle
