#include "vipio/distribution.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "../support/hpf.hpp"

using namespace vipio;
using namespace vipio::dist;
using vipio::oracle::assigned_bytes;
using vipio::oracle::random_descriptor;

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

// INTEGER B(14,17), PROCESSORS(3,4), DISTRIBUTE (CYCLIC(3),BLOCK).
RuntimeDescriptor example(std::int64_t local1 = 3, std::int64_t local2 = 5) {
  const std::vector<std::int64_t> flat = {2, 3, 4, 1, 4, 2, 14, local1, 2, 3, 17, local2, 1, 5};
  return parse_runtime_descriptor(flat);
}

std::vector<std::int64_t> view_bytes(const ProcessView& pv) {
  std::vector<std::int64_t> out;
  if (pv.total_bytes == 0) return out;
  for (const auto& r : view::enumerate_runs(pv.descriptor, 0, 0, pv.total_bytes))
    for (std::int64_t i = 0; i < r.length; ++i) out.push_back(r.file_offset + i);
  return out;
}

}  // namespace

TEST(RuntimeDescriptor, ParsesWorkedExample) {
  auto rd = example();
  EXPECT_EQ(rd.grid, (std::vector<std::int64_t>{3, 4}));
  ASSERT_EQ(rd.dims.size(), 2u);
  EXPECT_EQ(rd.dims[0].global_len, 14);
  EXPECT_EQ(rd.dims[1].global_len, 17);
  EXPECT_EQ(rd.dims[0].kind, Kind::cyclic);
  EXPECT_EQ(rd.dims[1].kind, Kind::block);
  EXPECT_EQ(to_flat(rd), (std::vector<std::int64_t>{2, 3, 4, 1, 4, 2, 14, 3, 2, 3, 17, 5, 1, 5}));
  EXPECT_EQ(parse_runtime_descriptor_json(to_json(rd)).dims[0].arg, 3);
}

TEST(RuntimeDescriptor, TrivialAndErrors) {
  const std::vector<std::int64_t> trivial = {1, 1, 1, 4, 1, 10, 10, 0, 0};
  auto rd = parse_runtime_descriptor(trivial);
  auto pv = build_process_view(rd, 0);
  EXPECT_EQ(pv.total_bytes, 40);

  const std::vector<std::int64_t> truncated = {2, 3, 4, 1, 4, 2, 14, 3, 2};
  EXPECT_EQ(code_of([&] { parse_runtime_descriptor(truncated); }), Errc::malformed_descriptor);
  EXPECT_EQ(code_of([] { parse_runtime_descriptor(std::vector<std::int64_t>{}); }), Errc::malformed_descriptor);
  const std::vector<std::int64_t> gen_block = {1, 2, 1, 4, 1, 10, 5, 3, 5};
  EXPECT_EQ(code_of([&] { parse_runtime_descriptor(gen_block); }), Errc::unsupported_distribution);
  const std::vector<std::int64_t> indirect = {1, 2, 1, 4, 1, 10, 5, 4, 5};
  EXPECT_EQ(code_of([&] { parse_runtime_descriptor(indirect); }), Errc::unsupported_distribution);
  EXPECT_EQ(code_of([] { parse_runtime_descriptor_json("{\"grid\":[2]}"); }), Errc::malformed_descriptor);
  EXPECT_EQ(code_of([] { build_process_view(example(), 12); }), Errc::rank_out_of_range);
}

// Processor 3 (1-based) is rank 2 here: grid coordinates (2, 0).
TEST(ProcessView, Processor3) {
  auto pv = build_process_view(example(3, 5), 2);
  EXPECT_EQ(pv.coords, (std::vector<std::int64_t>{2, 0}));
  const auto& dim2 = pv.descriptor;
  ASSERT_EQ(dim2.no_blocks(), 1u);
  EXPECT_EQ(dim2.skip, 672);
  EXPECT_EQ(dim2.blocks[0].offset, 0);
  EXPECT_EQ(dim2.blocks[0].repeat, 1);
  EXPECT_EQ(dim2.blocks[0].count, 5);
  EXPECT_EQ(dim2.blocks[0].stride, 0);
  const auto& dim1 = *dim2.blocks[0].subtype;
  ASSERT_EQ(dim1.no_blocks(), 1u);
  EXPECT_EQ(dim1.skip, 20);
  EXPECT_EQ(dim1.blocks[0].offset, 6 * 4);
  // Three elements; the leaf count is in bytes.
  EXPECT_EQ(dim1.blocks[0].count, 3 * 4);
  EXPECT_EQ(pv.total_bytes, 15 * 4);
}

// Processor 5 (1-based) is rank 4: coordinates (1, 1).
TEST(ProcessView, Processor5) {
  auto pv = build_process_view(example(5, 5), 4);
  EXPECT_EQ(pv.coords, (std::vector<std::int64_t>{1, 1}));
  const auto& dim1 = *pv.descriptor.blocks[0].subtype;
  ASSERT_EQ(dim1.no_blocks(), 2u);
  EXPECT_EQ(dim1.blocks[0].count, 3 * 4);
  EXPECT_EQ(dim1.blocks[1].count, 2 * 4);
  EXPECT_EQ(dim1.blocks[0].offset, 3 * 4);
  EXPECT_EQ(dim1.blocks[1].offset, (12 - 6) * 4);
  EXPECT_EQ(dim1.skip, 0);
  // Elements 4..6 and 13..14 (1-based) of each owned column.
  EXPECT_EQ(view_bytes(pv), assigned_bytes(example(), 4));
}

TEST(ProcessView, BlockSkipCorrection) {
  // global 17, BLOCK(5), coordinate 3 owns the 2 trailing elements.
  const std::vector<std::int64_t> flat = {1, 4, 1, 1, 1, 17, 2, 1, 5};
  auto pv = build_process_view(parse_runtime_descriptor(flat), 3);
  EXPECT_EQ(17 - 5 * (3 + 1) + (5 - 2), 0);
  EXPECT_EQ(pv.descriptor.skip, 0);
  EXPECT_EQ(pv.descriptor.blocks[0].offset, 15);
  EXPECT_EQ(pv.descriptor.blocks[0].count, 2);
}

TEST(ProcessView, LocalLengthMismatchIsAnError) {
  EXPECT_EQ(code_of([] { build_process_view(example(4, 5), 2); }), Errc::local_length_mismatch);
}

TEST(CoverCheck, WorkedExamplePartitions) {
  auto rep = cover_check(example());
  EXPECT_TRUE(rep.partition());
  EXPECT_EQ(rep.ranks, 12);
  EXPECT_EQ(rep.file_bytes, 14 * 17 * 4);
  for (std::int64_t r = 0; r < 12; ++r) {
    auto pv = build_process_view(for_rank(example(), r), r);
    EXPECT_EQ(view_bytes(pv), assigned_bytes(example(), r)) << "rank " << r;
  }
}

TEST(CoverCheck, BlockQuarters) {
  const std::vector<std::int64_t> flat = {1, 4, 1, 1, 1, 16, 4, 1, 4};
  auto rd = parse_runtime_descriptor(flat);
  auto rep = cover_check(rd);
  EXPECT_TRUE(rep.partition());
  for (std::int64_t r = 0; r < 4; ++r) {
    auto pv = build_process_view(rd, r);
    auto runs = view::enumerate_runs(pv.descriptor, 0, 0, pv.total_bytes);
    ASSERT_EQ(runs.size(), 1u);
    EXPECT_EQ(runs[0], (view::ByteRun{4 * r, 4}));
  }
}

TEST(CoverCheck, WrongLocalLengthReported) {
  std::vector<RuntimeDescriptor> per_rank;
  for (std::int64_t r = 0; r < 12; ++r) per_rank.push_back(for_rank(example(), r));
  per_rank[4].dims[0].local_len = 3;  // drops the irregular block
  auto gap = cover_check(per_rank);
  EXPECT_FALSE(gap.partition());
  EXPECT_FALSE(gap.gaps.empty());

  per_rank[4] = for_rank(example(), 4);
  per_rank[2].dims[1].local_len = 6;
  auto overlap = cover_check(per_rank);
  EXPECT_FALSE(overlap.partition());
  EXPECT_FALSE(overlap.overlaps.empty());
}

TEST(CoverCheck, RandomCorpusMatchesAssignmentOracle) {
  std::mt19937_64 rng(42);
  int corpus = 0;
  for (int i = 0; i < 200; ++i) {
    auto rd = random_descriptor(rng);
    auto rep = cover_check(rd);
    ASSERT_TRUE(rep.partition()) << to_json(rd);
    for (std::int64_t r = 0; r < rd.nprocs(); ++r) {
      auto local = for_rank(rd, r);
      auto pv = build_process_view(local, r);
      auto want = assigned_bytes(rd, r);
      ASSERT_EQ(pv.total_bytes, static_cast<std::int64_t>(want.size())) << to_json(local);
      ASSERT_EQ(view_bytes(pv), want) << to_json(local) << " rank " << r;
    }
    ++corpus;
  }
  EXPECT_GE(corpus, 50);
}

TEST(CoverCheck, CyclicWithFullArgIsBlockOnFirstCoordinate) {
  for (std::int64_t g = 1; g <= 12; ++g) {
    for (std::int64_t p = 1; p <= 4; ++p) {
      RuntimeDescriptor cyc{{p}, 0, 4, {{g, 0, Kind::cyclic, g}}};
      RuntimeDescriptor blk{{p}, 0, 4, {{g, 0, Kind::block, g}}};
      for (std::int64_t r = 0; r < p; ++r) {
        auto a = build_process_view(for_rank(cyc, r), r);
        auto b = build_process_view(for_rank(blk, r), r);
        EXPECT_EQ(view_bytes(a), view_bytes(b));
        EXPECT_EQ(a.total_bytes, r == 0 ? g * 4 : 0);
      }
    }
  }
}
