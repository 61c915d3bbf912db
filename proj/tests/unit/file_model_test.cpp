#include "vipio/file_model.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vipio;
using namespace vipio::model;

namespace {

Record rec(std::uint8_t v, std::size_t size = 2) { return Record(size, v); }

ModelFile file_of(std::initializer_list<std::uint8_t> vals) {
  std::vector<Record> r;
  for (auto v : vals) r.push_back(rec(v));
  return ModelFile(r);
}

DataBuffer buf_of(std::initializer_list<std::uint8_t> vals) {
  DataBuffer b;
  for (auto v : vals) b.records.push_back(rec(v));
  return b;
}

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

TEST(ModelFile, RejectsMixedRecordSizes) {
  EXPECT_EQ(code_of([] { ModelFile({rec(1, 2), rec(2, 3)}); }), Errc::record_size_mismatch);
  EXPECT_EQ(code_of([] { ModelFile({Record{}}); }), Errc::record_size_mismatch);
}

TEST(ModelFile, FrecIsOneBased) {
  auto f = file_of({1, 2, 3});
  EXPECT_EQ(f.frec(1), rec(1));
  EXPECT_EQ(f.frec(3), rec(3));
  EXPECT_EQ(code_of([&] { (void)f.frec(0); }), Errc::index_beyond_file);
  EXPECT_EQ(code_of([&] { (void)f.frec(4); }), Errc::index_beyond_file);
}

TEST(ModelOpen, ViewLengthFollowsMapping) {
  auto h = model_open(file_of({1, 2, 3}), Mode::read, MappingFunction({2, 1}));
  EXPECT_EQ(h.position(), 0u);
  EXPECT_EQ(h.view_length(), 2u);

  auto empty = model_open(ModelFile(), Mode::write, MappingFunction());
  EXPECT_EQ(empty.position(), 0u);
  EXPECT_EQ(empty.view_length(), 0u);

  auto f = file_of({4, 5, 6});
  auto star = model_open(f, Mode::read_write, MappingFunction::identity());
  EXPECT_EQ(apply_mapping(star.mapping(), f), f);
}

TEST(ModelClose, ResetsHandle) {
  auto h = model_open(file_of({1, 2, 3}), Mode::read_write, MappingFunction::identity());
  model_seek(h, 2);
  model_close(h);
  EXPECT_EQ(h.view_length(), 0u);
  EXPECT_EQ(h.position(), 0u);
  auto b = DataBuffer::with_capacity(1, 2);
  EXPECT_NE(code_of([&] { model_read(h, 1, b); }), Errc::ok);
  EXPECT_NO_THROW(model_seek(h, 0));
}

TEST(ModelSeek, BoundaryAndReplicatedIndex) {
  auto f = file_of({1, 2, 3, 4, 5, 6});
  auto h = model_open(f, Mode::read, MappingFunction::identity());
  model_seek(h, 6);
  EXPECT_EQ(h.position(), 6u);
  EXPECT_EQ(code_of([&] { model_seek(h, 7); }), Errc::out_of_view);
  EXPECT_EQ(h.position(), 6u);

  auto g = model_open(f, Mode::read, MappingFunction({2, 4, 2, 6}));
  model_seek(g, 2);
  auto b = DataBuffer::with_capacity(1, 2);
  EXPECT_EQ(model_read(g, 1, b), 1u);
  EXPECT_EQ(b.records.at(0), rec(2));
}

TEST(ModelRead, CountFormula) {
  auto h = model_open(file_of({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), Mode::read, MappingFunction::identity());
  model_seek(h, 8);
  auto b = DataBuffer::with_capacity(5, 2);
  EXPECT_EQ(model_read(h, 5, b), 2u);
  EXPECT_EQ(h.position(), 10u);
  EXPECT_EQ(code_of([&] { model_read(h, 1, b); }), Errc::exhausted);

  auto w = model_open(file_of({1}), Mode::write, MappingFunction::identity());
  EXPECT_EQ(code_of([&] { model_read(w, 1, b); }), Errc::not_readable);
}

// i = min(n, floor(dsize/recsize), viewlen - p), exhaustively on small cases.
TEST(ModelRead, CountLawExhaustive) {
  for (std::size_t flen = 0; flen <= 8; ++flen) {
    std::vector<Record> recs;
    for (std::size_t k = 0; k < flen; ++k) recs.push_back(rec(static_cast<std::uint8_t>(k)));
    ModelFile f;
    if (flen) f = ModelFile(recs);
    for (std::size_t p = 0; p <= flen; ++p) {
      for (std::size_t cap = 0; cap <= 8; ++cap) {
        for (std::size_t n = 1; n <= 8; ++n) {
          auto h = model_open(f, Mode::read, MappingFunction::identity());
          model_seek(h, p);
          auto b = DataBuffer::with_capacity(cap, 2);
          const std::size_t expect = std::min({n, cap, flen - p});
          if (expect == 0) {
            EXPECT_EQ(code_of([&] { model_read(h, n, b); }), Errc::exhausted);
            EXPECT_EQ(h.position(), p);
          } else {
            ASSERT_EQ(model_read(h, n, b), expect);
            EXPECT_EQ(h.position(), p + expect);
            for (std::size_t k = 0; k < expect; ++k) EXPECT_EQ(b.records[k], recs[p + k]);
          }
        }
      }
    }
  }
}

TEST(ModelRead, SequentialReadConcatenatesView) {
  auto f = file_of({10, 11, 12, 13, 14, 15});
  MappingFunction psi({6, 1, 1, 3, 5});
  auto h = model_open(f, Mode::read, psi);
  std::vector<Record> got;
  auto b = DataBuffer::with_capacity(2, 2);
  while (h.position() < h.view_length()) {
    b = DataBuffer::with_capacity(2, 2);
    model_read(h, 2, b);
    got.insert(got.end(), b.records.begin(), b.records.end());
  }
  std::vector<Record> expect;
  for (auto i : psi.indices()) expect.push_back(f.frec(i));
  EXPECT_EQ(got, expect);
}

TEST(ModelWrite, OverwriteAndAppend) {
  auto h = model_open(file_of({'a', 'b', 'c'}), Mode::write, MappingFunction::identity());
  model_seek(h, 1);
  model_write(h, 2, buf_of({'x', 'y'}));
  EXPECT_EQ(h.file(), file_of({'a', 'x', 'y'}));
  EXPECT_EQ(h.position(), 3u);

  auto e = model_open(ModelFile(), Mode::write, MappingFunction::identity());
  model_write(e, 3, buf_of({1, 2, 3}));
  EXPECT_EQ(e.file().flen(), 3u);

  DataBuffer mixed{{rec(1, 2), rec(2, 3)}};
  auto m = model_open(ModelFile(), Mode::write, MappingFunction::identity());
  EXPECT_EQ(code_of([&] { model_write(m, 2, mixed); }), Errc::record_size_mismatch);
  EXPECT_EQ(code_of([&] { model_write(m, 3, buf_of({1, 2})); }), Errc::buffer_too_short);
  auto r = model_open(file_of({1}), Mode::read, MappingFunction::identity());
  EXPECT_EQ(code_of([&] { model_write(r, 1, buf_of({1})); }), Errc::not_writable);
  auto s = model_open(file_of({1}), Mode::write, MappingFunction::identity());
  EXPECT_EQ(code_of([&] { model_write(s, 1, DataBuffer{{rec(1, 4)}}); }), Errc::record_size_mismatch);
}

TEST(ModelWrite, NeverShrinks) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Record> recs(rng() % 6 + 1, rec(0));
    auto h = model_open(ModelFile(recs), Mode::write, MappingFunction::identity());
    const auto before = h.file().flen();
    model_seek(h, rng() % (before + 1));
    const std::size_t n = rng() % 4 + 1;
    model_write(h, n, DataBuffer{std::vector<Record>(n, rec(9))});
    EXPECT_GE(h.file().flen(), before);
  }
}

TEST(ModelInsert, GrowsByN) {
  auto h = model_open(file_of({'a', 'b'}), Mode::write, MappingFunction::identity());
  model_seek(h, 1);
  model_insert(h, 1, buf_of({'x'}));
  EXPECT_EQ(h.file(), file_of({'a', 'x', 'b'}));

  auto w = model_open(file_of({1, 2}), Mode::write, MappingFunction::identity());
  auto i = model_open(file_of({1, 2}), Mode::write, MappingFunction::identity());
  model_seek(w, 2);
  model_seek(i, 2);
  model_write(w, 2, buf_of({7, 8}));
  model_insert(i, 2, buf_of({7, 8}));
  EXPECT_EQ(w.file(), i.file());

  auto r = model_open(file_of({1}), Mode::read, MappingFunction::identity());
  EXPECT_EQ(code_of([&] { model_insert(r, 1, buf_of({1})); }), Errc::not_writable);
}

TEST(ApplyMapping, Examples) {
  auto f = file_of({1, 2, 3, 4, 5, 6});
  EXPECT_EQ(apply_mapping(MappingFunction({2, 4, 2, 6}), f), file_of({2, 4, 2, 6}));
  EXPECT_TRUE(apply_mapping(MappingFunction(), f).empty());
  EXPECT_EQ(apply_mapping(MappingFunction({1, 2, 3, 4, 5, 6}), f), f);
  EXPECT_EQ(code_of([&] { apply_mapping(MappingFunction({7}), f); }), Errc::index_beyond_file);
}

TEST(ApplyMapping, IdentityIsFixpoint) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Record> recs;
    for (unsigned k = rng() % 10; k > 0; --k) recs.push_back(rec(static_cast<std::uint8_t>(rng())));
    ModelFile f;
    if (!recs.empty()) f = ModelFile(recs);
    EXPECT_EQ(apply_mapping(MappingFunction::identity(), f), f);
  }
}
