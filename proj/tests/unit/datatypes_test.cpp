#include "vipio/datatypes.hpp"

#include <gtest/gtest.h>

#include <set>

#include "../support/oracles.hpp"

using namespace vipio;
using namespace vipio::dt;
namespace oracle = vipio::oracle;

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

}  // namespace

TEST(BaseType, ExtentTable) {
  EXPECT_EQ(kByte.extent(), 1);
  EXPECT_EQ(kChar.extent(), 1);
  EXPECT_EQ(kShort.extent(), 2);
  EXPECT_EQ(kUShort.extent(), 2);
  EXPECT_EQ(kInt.extent(), 4);
  EXPECT_EQ(kUInt.extent(), 4);
  EXPECT_EQ(kFloat.extent(), 4);
  EXPECT_EQ(kLong.extent(), 8);
  EXPECT_EQ(kULong.extent(), 8);
  EXPECT_EQ(kDouble.extent(), 8);
  EXPECT_EQ(BaseType::from_name("double"), kDouble);
  EXPECT_FALSE(BaseType::from_name("quad"));
}

TEST(ElementType, Examples) {
  EXPECT_EQ(element_type_of(Datatype::vector(10, 5, 20, kInt)), kInt);
  EXPECT_EQ(element_type_of(kDouble), kDouble);
  EXPECT_EQ(element_type_of(Datatype::contiguous(3, Datatype::vector(2, 1, 4, kChar))), kChar);
  auto mixed = Datatype::structure({1, 1}, {0, 8}, {kDouble, kInt});
  EXPECT_EQ(element_type_of(mixed), kDouble);
  EXPECT_EQ(code_of([&] { element_type_of(mixed, true); }), Errc::heterogeneous_leaves);
}

TEST(Normalize, VectorReductions) {
  auto t = Datatype::vector(3, 2, 2, kInt);
  EXPECT_EQ(normalize(t), Datatype::contiguous(6, kInt));
  EXPECT_EQ(oracle::bytes(normalize(t)), oracle::bytes(t));

  auto v = Datatype::vector(2, 5, 10, kInt);
  EXPECT_EQ(normalize(v), Datatype::hvector(2, 5, 40, kInt));
  EXPECT_EQ(oracle::bytes(normalize(v)), oracle::bytes(v));

  EXPECT_EQ(normalize(Datatype::vector(1, 4, 9, kInt)), Datatype::contiguous(4, kInt));
  EXPECT_EQ(normalize(Datatype::indexed({1, 2}, {0, 3}, kShort)), Datatype::hindexed({1, 2}, {0, 6}, kShort));
}

TEST(Normalize, SubarrayIsDisplacedVector) {
  auto s = Datatype::subarray({12, 12}, {12, 3}, {0, 3}, Order::c, kInt);
  auto n = normalize(s);
  const auto& st = std::get<Struct>(n.node());
  ASSERT_EQ(st.blocklens, std::vector<std::int64_t>{1});
  EXPECT_EQ(st.displs_bytes, std::vector<std::int64_t>{3 * 4});
  EXPECT_EQ(st.upper_bound, 12 * 12 * 4);
  EXPECT_EQ(n.child(), normalize(Datatype::vector(12, 3, 12, kInt)));
  EXPECT_EQ(oracle::bytes(n), oracle::bytes(s));
  EXPECT_EQ(n.extent(), s.extent());
}

TEST(Normalize, ArgumentChecks) {
  EXPECT_EQ(code_of([] { normalize(Datatype::contiguous(0, kInt)); }), Errc::invalid_arguments);
  EXPECT_EQ(code_of([] { normalize(Datatype::vector(2, 3, 2, kInt)); }), Errc::invalid_arguments);
  EXPECT_EQ(code_of([] { normalize(Datatype::subarray({4}, {5}, {0}, Order::c, kInt)); }),
            Errc::invalid_arguments);
  EXPECT_EQ(code_of([] { normalize(Datatype::subarray({4}, {2}, {3}, Order::c, kInt)); }),
            Errc::invalid_arguments);
  EXPECT_EQ(code_of([] { normalize(Datatype::indexed({2, 1}, {3, 0}, kInt)); }), Errc::invalid_arguments);
  EXPECT_EQ(code_of([] {
              normalize(Datatype::darray(4, 0, {10}, {DimDistribution::block(2)}, {4}, Order::c, kInt));
            }),
            Errc::invalid_arguments);
  EXPECT_EQ(code_of([] {
              normalize(Datatype::darray(4, 0, {10, 10}, {DimDistribution::block(), DimDistribution::block()},
                                         {2, 3}, Order::c, kInt));
            }),
            Errc::invalid_arguments);
  EXPECT_EQ(code_of([] {
              normalize(Datatype::darray(4, 4, {10, 10}, {DimDistribution::block(), DimDistribution::block()},
                                         {2, 2}, Order::c, kInt));
            }),
            Errc::rank_out_of_range);
}

TEST(GridCoords, Examples) {
  EXPECT_EQ(grid_coords(0, {2, 2}), (std::vector<std::int64_t>{0, 0}));
  EXPECT_EQ(grid_coords(2, {2, 2}), (std::vector<std::int64_t>{1, 0}));
  std::set<std::vector<std::int64_t>> seen;
  for (std::int64_t r = 0; r < 6; ++r) {
    auto c = grid_coords(r, {2, 3});
    EXPECT_EQ(c, oracle::coords_of(r, {2, 3}));
    seen.insert(c);
  }
  EXPECT_EQ(seen.size(), 6u);
  EXPECT_EQ(code_of([] { grid_coords(6, {2, 3}); }), Errc::rank_out_of_range);
}

TEST(DarrayBlockParams, Examples) {
  EXPECT_EQ(darray_block_params(DimDistribution::block(4), 6, 2, 1).my_size, 2);
  EXPECT_EQ(darray_block_params(DimDistribution::block(4), 6, 2, 1).start_offset, 4);
  EXPECT_EQ(darray_block_params(DimDistribution::cyclic(4), 12, 2, 0).count, 2);
  EXPECT_EQ(darray_block_params(DimDistribution::cyclic(4), 12, 2, 1).count, 1);
  auto p = darray_block_params(DimDistribution::cyclic(4), 14, 2, 1);
  EXPECT_EQ(p.last_blksize, 2);
  EXPECT_EQ(p.my_size, 6);
}

// my_size must match the element-ownership oracle on every dimension shape.
TEST(DarrayBlockParams, MatchesOwnership) {
  for (std::int64_t g = 1; g <= 20; ++g) {
    for (std::int64_t procs = 1; procs <= 5; ++procs) {
      std::vector<DimDistribution> dists = {DimDistribution::block(), DimDistribution::cyclic()};
      for (std::int64_t a = 1; a <= 5; ++a) {
        dists.push_back(DimDistribution::cyclic(a));
        if (a * procs >= g) dists.push_back(DimDistribution::block(a));
      }
      for (const auto& d : dists) {
        for (std::int64_t c = 0; c < procs; ++c) {
          std::int64_t owned = 0;
          for (std::int64_t i = 0; i < g; ++i) owned += oracle::owner(d, g, procs, i) == c;
          EXPECT_EQ(darray_block_params(d, g, procs, c).my_size, owned) << g << " " << procs << " " << c;
        }
      }
    }
  }
}

TEST(Darray, RanksPartitionTheArray) {
  const std::vector<std::vector<DimDistribution>> mixes = {
      {DimDistribution::block(), DimDistribution::block()},
      {DimDistribution::cyclic(2), DimDistribution::cyclic(2)},
      {DimDistribution::block(), DimDistribution::cyclic()},
      {DimDistribution::cyclic(3), DimDistribution::block()},
      {DimDistribution::cyclic(4), DimDistribution::cyclic(1)},
  };
  for (const auto order : {Order::c, Order::fortran}) {
    for (std::int64_t g0 = 1; g0 <= 9; ++g0) {
      for (std::int64_t g1 = 1; g1 <= 10; ++g1) {
        for (const auto& grid : std::vector<std::vector<std::int64_t>>{{1, 1}, {1, 2}, {2, 1}, {2, 2}}) {
          for (const auto& mix : mixes) {
            std::vector<int> hits(static_cast<std::size_t>(g0 * g1), 0);
            for (std::int64_t r = 0; r < grid[0] * grid[1]; ++r) {
              auto t = Datatype::darray(grid[0] * grid[1], r, {g0, g1}, mix, grid, order, kInt);
              auto n = normalize(t);
              auto got = oracle::bytes(n);
              ASSERT_EQ(got, oracle::bytes(t)) << to_string(t);
              EXPECT_EQ(n.extent(), g0 * g1 * 4);
              EXPECT_EQ(n.size(), static_cast<std::int64_t>(got.size()));
              for (auto b : got) {
                if (b % 4 == 0) hits[static_cast<std::size_t>(b / 4)]++;
              }
            }
            for (auto h : hits) ASSERT_EQ(h, 1);
          }
        }
      }
    }
  }
}

TEST(Normalize, PreservesOffsetsOnRandomTrees) {
  oracle::TreeGen gen(11);
  int checked = 0;
  while (checked < 1500) {
    auto t = gen.tree(static_cast<int>(gen.uniform(1, 3)), gen.base());
    if (oracle::bytes(t).size() > 4096) continue;
    auto n = normalize(t);
    ASSERT_EQ(oracle::bytes(n), oracle::bytes(t)) << to_string(t);
    ASSERT_EQ(n.extent(), t.extent()) << to_string(t);
    ASSERT_EQ(t.extent(), oracle::extent(t)) << to_string(t);
    ASSERT_EQ(t.size(), static_cast<std::int64_t>(oracle::bytes(t).size())) << to_string(t);
    ++checked;
  }
}

TEST(TextForm, RoundTrip) {
  auto t = parse_datatype("darray(size=4,rank=2,[9,10],[cyclic(2),cyclic(2)],[2,2],C;int)");
  const auto& d = std::get<Darray>(t.node());
  EXPECT_EQ(d.rank, 2);
  EXPECT_EQ(d.distribs[1], DimDistribution::cyclic(2));
  EXPECT_EQ(parse_datatype(to_string(t)), t);

  EXPECT_EQ(parse_datatype("vector(3,2,3;int)"), Datatype::vector(3, 2, 3, kInt));
  EXPECT_EQ(parse_datatype(" struct([3,2,16],[0,20,60];int,double,char) "),
            Datatype::structure({3, 2, 16}, {0, 20, 60}, {kInt, kDouble, kChar}));

  oracle::TreeGen gen(5);
  for (int i = 0; i < 300; ++i) {
    auto r = gen.tree(3, gen.base());
    EXPECT_EQ(parse_datatype(to_string(r)), r);
  }
  EXPECT_EQ(code_of([] { parse_datatype("vector(3,2;int)"); }), Errc::invalid_arguments);
  EXPECT_EQ(code_of([] { parse_datatype("blob"); }), Errc::invalid_arguments);
}
