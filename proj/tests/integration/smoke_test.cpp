#include <gtest/gtest.h>

#include "../support/cluster.hpp"

using namespace vipio;

TEST(Smoke, WriteReadBack) {
  fixture::LocalCluster c(2);
  auto s = c.session();
  auto h = s->open("f", mode::rdwr | mode::create);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  s->set_view(h, 0, dt::kInt, dt::kInt);
  EXPECT_EQ(s->write(h, v.data(), 100).bytes, 400u);
  EXPECT_EQ(s->get_size(h), 400u);
  std::vector<int> r(100, -1);
  EXPECT_EQ(s->read_at(h, 0, r.data(), 100).bytes, 400u);
  EXPECT_EQ(r, v);
  s->close(h);
}
