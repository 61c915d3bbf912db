#include <benchmark/benchmark.h>

#include <filesystem>

#include "vipio/client.hpp"
#include "vipio/protocol.hpp"
#include "vipio/server.hpp"
#include "vipio/viewdesc.hpp"

using namespace vipio;

static void BM_Encode(benchmark::State& state) {
  proto::Message m;
  m.type = proto::MsgType::data;
  m.data.resize(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(proto::encode(m));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Encode)->Arg(64)->Arg(64 << 10);

static void BM_Decode(benchmark::State& state) {
  proto::Message m;
  m.type = proto::MsgType::data;
  m.data.resize(static_cast<std::size_t>(state.range(0)));
  auto wire = proto::encode(m);
  for (auto _ : state) benchmark::DoNotOptimize(proto::decode(wire));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Decode)->Arg(64)->Arg(64 << 10);

static void BM_EnumerateRuns(benchmark::State& state) {
  auto t = dt::Datatype::vector(64, 2, 8, dt::Datatype::hvector(2, 3, 40, dt::kInt));
  auto d = view::build_descriptor(t).desc;
  for (auto _ : state) benchmark::DoNotOptimize(view::enumerate_runs(d, 0, 17, state.range(0)));
}
BENCHMARK(BM_EnumerateRuns)->Arg(4 << 10)->Arg(1 << 20);

static void BM_AbsoluteOffset(benchmark::State& state) {
  auto t = dt::Datatype::darray(4, 3, {100, 120}, {dt::DimDistribution::cyclic(3), dt::DimDistribution::block()},
                                {2, 2}, dt::Order::c, dt::kDouble);
  auto d = view::build_descriptor(t).desc;
  std::int64_t off = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(view::absolute_offset(d, off));
    off = (off + 4093) % (1 << 24);
  }
}
BENCHMARK(BM_AbsoluteOffset);

static void BM_LoopbackRead(benchmark::State& state) {
  const auto servers = static_cast<std::size_t>(state.range(0));
  auto root = std::filesystem::temp_directory_path() / "vipio_micro";
  std::filesystem::remove_all(root);
  auto cfg = config::local_cluster(servers, root, 256 << 10);
  net::LoopbackNetwork network;
  server::Cluster cluster(cfg, network);
  {
    client::Session s(network, cfg);
    s.connect(0);
    auto h = s.open("bench", mode::rdwr | mode::create);
    std::vector<std::uint8_t> buf(4 << 20, 1);
    s.write(h, buf.data(), static_cast<std::int64_t>(buf.size()));
    for (auto _ : state) s.read_at(h, 0, buf.data(), static_cast<std::int64_t>(buf.size()));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(buf.size()));
    s.close(h);
    s.disconnect();
  }
  cluster.stop();
  std::filesystem::remove_all(root);
}
BENCHMARK(BM_LoopbackRead)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
