#include "vipio/bench.hpp"

#include <barrier>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vipio/client.hpp"
#include "vipio/distribution.hpp"
#include "vipio/layout.hpp"
#include "vipio/server.hpp"

namespace vipio::bench {

using client::Handle;
using client::Session;
using client::Whence;
using dt::Datatype;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------- spec

BenchSpec parse_spec(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_arguments, std::string("bench spec: ") + e.what());
  }
  BenchSpec s;
  try {
    s.file_size = j.value("file_size", s.file_size);
    s.clients = j.value("clients", s.clients);
    const auto pattern = j.value("pattern", std::string("contiguous"));
    if (pattern == "contiguous") {
      s.pattern = Pattern::contiguous;
    } else if (pattern == "view") {
      s.pattern = Pattern::view;
    } else if (pattern == "distribution") {
      s.pattern = Pattern::distribution;
    } else {
      throw Error(Errc::invalid_arguments, "bench spec: unknown pattern " + pattern);
    }
    s.filetype = j.value("filetype", s.filetype);
    s.etype = j.value("etype", s.etype);
    s.descriptor = j.value("descriptor", s.descriptor);
    s.iterations = j.value("iterations", s.iterations);
    s.rotate_files = j.value("rotate_files", s.rotate_files);
    s.barrier_sync = j.value("barrier_sync", s.barrier_sync);
    s.record_messages = j.value("record_messages", s.record_messages);
    s.servers = j.value("servers", s.servers);
    s.hints = j.value("hints", s.hints);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_arguments, std::string("bench spec: ") + e.what());
  }
  if (s.iterations < 1 || s.rotate_files < 1 || s.clients < 1) {
    throw Error(Errc::invalid_arguments, "bench spec: clients, iterations and rotate_files must be >= 1");
  }
  if (s.pattern == Pattern::view && s.filetype.empty()) throw Error(Errc::invalid_arguments, "view needs a filetype");
  if (s.pattern == Pattern::distribution && s.descriptor.empty()) {
    throw Error(Errc::invalid_arguments, "distribution needs a descriptor");
  }
  if (!dt::BaseType::from_name(s.etype)) throw Error(Errc::invalid_arguments, "unknown etype " + s.etype);
  return s;
}

BenchSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_arguments, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

// ---------------------------------------------------------------- bench

namespace {

std::string substitute(std::string text, std::uint32_t rank, std::uint32_t size) {
  for (const auto& [key, value] : {std::pair{std::string("{rank}"), rank}, std::pair{std::string("{size}"), size}}) {
    for (auto at = text.find(key); at != std::string::npos; at = text.find(key)) {
      text.replace(at, key.size(), std::to_string(value));
    }
  }
  return text;
}

std::unique_ptr<Session> connect(net::Network& network, const config::ClusterConfig& cfg,
                                 std::optional<net::NodeId> buddy = {}) {
  Session::Options o;
  o.preferred_buddy = buddy;
  auto s = std::make_unique<Session>(network, cfg, o);
  s->connect(0);
  return s;
}

struct ClientPlan {
  std::uint64_t offset = 0;  // byte offset for contiguous slices
  std::uint64_t length = 0;  // bytes to request
  bool use_view = false;
  Datatype filetype = dt::kByte;
  view::AccessDesc desc;
};

}  // namespace

BenchRow run_bench_on(net::Network& network, const config::ClusterConfig& cfg, const BenchSpec& spec) {
  const auto C = spec.clients;
  if (spec.file_size < C) throw Error(Errc::invalid_arguments, "file too small for the client count");
  const auto ids = cfg.server_ids();
  const auto et = *dt::BaseType::from_name(spec.etype);
  std::vector<net::NodeId> rank_servers;
  for (std::uint32_t r = 0; r < C; ++r) rank_servers.push_back(ids[r % ids.size()]);

  std::vector<ClientPlan> plans(C);
  dist::RuntimeDescriptor rd;
  if (spec.pattern == Pattern::distribution) {
    rd = dist::parse_runtime_descriptor(spec.descriptor);
    if (rd.nprocs() != static_cast<std::int64_t>(C)) {
      throw Error(Errc::invalid_arguments, "descriptor has " + std::to_string(rd.nprocs()) + " processes, spec has " +
                                               std::to_string(C) + " clients");
    }
  }
  for (std::uint32_t r = 0; r < C; ++r) {
    auto& p = plans[r];
    switch (spec.pattern) {
      case Pattern::contiguous: {
        const auto part = spec.file_size / C;
        p.offset = r * part;
        p.length = r + 1 == C ? spec.file_size - p.offset : part;
        break;
      }
      case Pattern::view:
        p.use_view = true;
        p.filetype = dt::parse_datatype(substitute(spec.filetype, r, C));
        p.length = spec.file_size;
        break;
      case Pattern::distribution: {
        auto pv = dist::build_process_view(rd, r);
        p.use_view = true;
        p.desc = std::move(pv.descriptor);
        p.length = static_cast<std::uint64_t>(pv.total_bytes);
        break;
      }
    }
    p.length -= p.length % static_cast<std::uint64_t>(et.extent());
  }

  std::optional<layout::FileHint> hint;
  if (spec.hints) {
    switch (spec.pattern) {
      case Pattern::contiguous: hint = layout::striping_hint(cfg.stripe_size, ids); break;
      case Pattern::distribution: hint = layout::distribution_hint(rd, rank_servers); break;
      case Pattern::view: {
        std::vector<std::int64_t> disps(C, 0), bytes;
        std::vector<Datatype> fts;
        for (auto& p : plans) {
          const auto d = view::build_descriptor(p.filetype).desc;
          const auto periods = static_cast<std::int64_t>(spec.file_size) / d.total_extent;
          bytes.push_back(periods * d.total_actual);
          fts.push_back(p.filetype);
        }
        hint = layout::view_hint(rank_servers, disps, fts, bytes);
        break;
      }
    }
  }

  std::vector<std::string> names;
  {
    auto prep = connect(network, cfg);
    constexpr std::uint64_t kChunk = 4 << 20;
    for (std::uint32_t k = 0; k < spec.rotate_files; ++k) {
      names.push_back("bench_" + std::to_string(k));
      try {
        prep->remove(names.back());
      } catch (const Error&) {
      }
      auto h = prep->open(names.back(), mode::wronly | mode::create, hint ? &*hint : nullptr);
      for (std::uint64_t at = 0; at < spec.file_size; at += kChunk) {
        auto n = std::min(kChunk, spec.file_size - at);
        auto data = client::pattern_bytes(k + at, n);
        prep->write_at(h, static_cast<std::int64_t>(at), data.data(), static_cast<std::int64_t>(n));
      }
      prep->close(h);
    }
    prep->disconnect();
  }

  std::vector<std::unique_ptr<Session>> sessions;
  std::vector<std::vector<Handle>> handles(C);
  for (std::uint32_t r = 0; r < C; ++r) {
    sessions.push_back(connect(network, cfg, rank_servers[r]));
    for (const auto& name : names) {
      auto h = sessions[r]->open(name, mode::rdonly);
      if (spec.pattern == Pattern::view) sessions[r]->set_view(h, 0, et, plans[r].filetype);
      if (spec.pattern == Pattern::distribution) sessions[r]->set_view(h, 0, et, plans[r].desc);
      handles[r].push_back(h);
    }
    sessions[r]->reset_counters();
  }

  const auto I = spec.iterations;
  std::vector<std::vector<Clock::time_point>> starts(I, std::vector<Clock::time_point>(C));
  std::vector<std::vector<Clock::time_point>> ends = starts;
  std::vector<std::uint64_t> moved(C, 0);
  std::vector<std::exception_ptr> errors(C);
  std::barrier sync(static_cast<std::ptrdiff_t>(C));
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < C; ++r) {
    threads.emplace_back([&, r] {
      std::vector<std::uint8_t> buf(plans[r].length);
      const auto count = static_cast<std::int64_t>(plans[r].length) / et.extent();
      for (std::uint32_t i = 0; i < I; ++i) {
        if (spec.barrier_sync) sync.arrive_and_wait();
        starts[i][r] = Clock::now();
        try {
          if (!errors[r]) {
            auto h = handles[r][i % names.size()];
            auto st = plans[r].use_view ? sessions[r]->read_at(h, 0, buf.data(), count)
                                        : sessions[r]->read_at(h, static_cast<std::int64_t>(plans[r].offset) /
                                                                   et.extent(),
                                                               buf.data(), count);
            moved[r] += st.bytes;
          }
        } catch (...) {
          errors[r] = std::current_exception();
        }
        ends[i][r] = Clock::now();
        if (spec.barrier_sync) sync.arrive_and_wait();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BenchRow row;
  row.clients = C;
  row.servers = ids.size();
  std::vector<double> times;
  for (std::uint32_t i = 0; i < I; ++i) {
    if (spec.barrier_sync) {
      auto t0 = *std::min_element(starts[i].begin(), starts[i].end());
      auto t1 = *std::max_element(ends[i].begin(), ends[i].end());
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    } else {
      double worst = 0;
      for (std::uint32_t r = 0; r < C; ++r) {
        worst = std::max(worst, std::chrono::duration<double>(ends[i][r] - starts[i][r]).count());
      }
      times.push_back(worst);
    }
  }
  row.max = *std::max_element(times.begin(), times.end());
  row.min = *std::min_element(times.begin(), times.end());
  row.mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
  if (times.size() > 1) {
    double ss = 0;
    for (auto t : times) ss += (t - row.mean) * (t - row.mean);
    row.variance = ss / static_cast<double>(times.size() - 1);
  }
  for (std::uint32_t r = 0; r < C; ++r) {
    if (spec.record_messages) {
      auto k = sessions[r]->counters();
      row.acks += k.acks;
      row.datas += k.datas;
    }
    row.bytes += moved[r];
    for (auto h : handles[r]) sessions[r]->close(h);
    sessions[r]->disconnect();
  }
  return row;
}

std::vector<BenchRow> run_bench(const config::ClusterConfig& cfg, const BenchSpec& spec) {
  auto sweep = spec.servers;
  if (sweep.empty()) sweep.push_back(cfg.servers.size());
  std::vector<BenchRow> rows;
  for (auto n : sweep) {
    auto sub = cfg.first(n);
    net::LoopbackNetwork network;
    server::Cluster cluster(sub, network);
    rows.push_back(run_bench_on(network, sub, spec));
    cluster.stop();
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "clients,servers,max,min,mean,variance,acks,datas,bytes\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << r.clients << ',' << r.servers << ',' << r.max << ',' << r.min << ',' << r.mean << ',' << r.variance << ','
        << r.acks << ',' << r.datas << ',' << r.bytes << '\n';
  }
}

// ---------------------------------------------------------------- regression

namespace {

struct SuiteFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(bool cond, const std::string& what) {
  if (!cond) throw SuiteFailure(what);
}

template <class F>
void expect_error(Errc want, const std::string& what, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.code() == want) return;
    throw SuiteFailure(what + ": expected " + std::string(errc_name(want)) + ", got " + e.what());
  }
  throw SuiteFailure(what + ": expected " + std::string(errc_name(want)) + ", call succeeded");
}

struct Ctx {
  net::Network& network;
  const config::ClusterConfig& cfg;
  std::string prefix;

  std::string name(const std::string& s) const { return prefix + "_" + s; }
  std::unique_ptr<Session> session(std::optional<net::NodeId> buddy = {}) const {
    return connect(network, cfg, buddy);
  }
};

std::vector<int> ints(int from, int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), from);
  return v;
}

void openmodes(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("modes");
  auto w = s->open(f, mode::wronly | mode::create);
  auto data = ints(0, 16);
  s->write(w, data.data(), 64);
  int probe = 0;
  expect_error(Errc::not_readable, "read of a write-only file", [&] { s->read(w, &probe, 4); });
  s->close(w);
  expect_error(Errc::mode_conflict, "RDONLY with CREATE", [&] { s->open(f, mode::rdonly | mode::create); });
  expect_error(Errc::mode_conflict, "RDONLY with EXCL", [&] { s->open(f, mode::rdonly | mode::excl); });
  expect_error(Errc::mode_conflict, "RDWR with SEQUENTIAL", [&] { s->open(f, mode::rdwr | mode::sequential); });
  expect_error(Errc::mode_conflict, "two access modes", [&] { s->open(f, mode::rdwr | mode::wronly); });
  expect_error(Errc::mode_conflict, "no access mode", [&] { s->open(f, mode::create); });
  expect_error(Errc::exists, "CREATE|EXCL on an existing file", [&] { s->open(f, mode::rdwr | mode::create | mode::excl); });
  expect_error(Errc::no_such_file, "open of a missing file", [&] { s->open(c.name("absent"), mode::rdonly); });
  auto r = s->open(f, mode::rdonly);
  expect_error(Errc::not_writable, "write to a read-only file", [&] { s->write(r, &probe, 4); });
  std::vector<int> back(16);
  check(s->read(r, back.data(), 64).bytes == 64 && back == data, "read-only open sees the data");
  s->close(r);
  auto d = s->open(c.name("doomed"), mode::rdwr | mode::create | mode::delete_on_close);
  s->close(d);
  expect_error(Errc::no_such_file, "DELETE_ON_CLOSE removes the file", [&] { s->open(c.name("doomed"), mode::rdonly); });
  auto a = s->open(f, mode::wronly | mode::append);
  check(s->get_position(a) == 64, "APPEND starts at the end");
  s->close(a);
  s->remove(f);
}

void manyopens(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("many");
  s->close(s->open(f, mode::rdwr | mode::create));
  std::vector<Handle> hs;
  for (int i = 0; i < 100; ++i) hs.push_back(s->open(f, mode::rdonly));
  for (int i = 0; i < 100; ++i) check(hs[static_cast<std::size_t>(i)] == i, "handles are dense table indices");
  check(s->open_files() == 100, "100 open entries");
  check(s->table_capacity() >= 100 && (s->table_capacity() - 10) % 5 == 0, "table grows from 10 by 5");
  for (int i = 0; i < 100; i += 2) s->close(hs[static_cast<std::size_t>(i)]);
  check(s->open(f, mode::rdonly) == 100, "closed slots are not reused while entries remain");
  for (int i = 1; i < 100; i += 2) s->close(hs[static_cast<std::size_t>(i)]);
  s->close(100);
  check(s->open_files() == 0 && s->table_capacity() == 0, "table torn down when empty");
  check(s->open(f, mode::rdonly) == 0, "handles restart after cleanup");
  s->close(0);
  s->remove(f);
}

void openclose(const Ctx& c) {
  auto s = c.session();
  expect_error(Errc::bad_handle, "close of a never-opened handle", [&] { s->close(3); });
  const auto f = c.name("oc");
  auto h = s->open(f, mode::rdwr | mode::create);
  s->close(h);
  expect_error(Errc::bad_handle, "double close", [&] { s->close(h); });
  int x = 0;
  expect_error(Errc::bad_handle, "read on a closed handle", [&] { s->read(h, &x, 4); });
  expect_error(Errc::bad_handle, "negative handle", [&] { s->get_size(-1); });
  s->remove(f);
  expect_error(Errc::no_such_file, "remove twice", [&] { s->remove(f); });
  s->disconnect();
  expect_error(Errc::not_connected, "open after disconnect", [&] { s->open(f, mode::rdwr | mode::create); });
  expect_error(Errc::not_connected, "double disconnect", [&] { s->disconnect(); });
}

void readwrite(const Ctx& c) {
  const int C = 4;
  const int per = 20000;
  const auto f = c.name("rw");
  std::vector<std::unique_ptr<Session>> ss;
  std::vector<Handle> hs;
  for (int r = 0; r < C; ++r) {
    ss.push_back(c.session());
    hs.push_back(ss.back()->open(f, mode::rdwr | mode::create));
  }
  std::vector<std::thread> ts;
  std::vector<std::string> errs(C);
  for (int r = 0; r < C; ++r) {
    ts.emplace_back([&, r] {
      try {
        auto data = client::pattern_bytes(static_cast<std::uint64_t>(r), per);
        ss[static_cast<std::size_t>(r)]->write_at(hs[static_cast<std::size_t>(r)], r * per, data.data(), per);
      } catch (const std::exception& e) {
        errs[static_cast<std::size_t>(r)] = e.what();
      }
    });
  }
  for (auto& t : ts) t.join();
  for (auto& e : errs) check(e.empty(), "concurrent disjoint writes: " + e);
  for (int r = 0; r < C; ++r) {
    std::vector<std::uint8_t> all(C * per);
    auto st = ss[static_cast<std::size_t>(r)]->read_at(hs[static_cast<std::size_t>(r)], 0, all.data(), C * per);
    check(st.bytes == C * per, "whole file read back");
    for (int q = 0; q < C; ++q) {
      auto want = client::pattern_bytes(static_cast<std::uint64_t>(q), per);
      check(std::equal(want.begin(), want.end(), all.begin() + q * per), "client part matches what was written");
    }
  }
  for (int r = 0; r < C; ++r) ss[static_cast<std::size_t>(r)]->close(hs[static_cast<std::size_t>(r)]);
  ss[0]->remove(f);
}

// Element index of the k-th visible int of vector(count, blocklen, stride; int) tiled from 0.
std::int64_t vector_elem(std::int64_t k, std::int64_t count, std::int64_t blocklen, std::int64_t stride) {
  const auto per = count * blocklen;
  const auto ext = (count - 1) * stride + blocklen;
  const auto t = k / per, in = k % per;
  return t * ext + (in / blocklen) * stride + in % blocklen;
}

void rdwr(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("rdwr");
  auto h = s->open(f, mode::rdwr | mode::create);
  s->set_view(h, 0, dt::kInt, Datatype::vector(8, 2, 4, dt::kInt));
  auto mem = ints(1000, 7 * 40);
  const auto mt = Datatype::vector(4, 1, 2, dt::kInt);
  auto st = s->write(h, mem.data(), 40, mt);
  check(st.bytes == 40 * 16, "gathered write size");
  check(Session::get_count(st, mt) == 40, "get_count in memory-type units");
  s->set_view(h, 0, dt::kInt, dt::kInt);
  std::vector<int> raw(static_cast<std::size_t>(vector_elem(159, 8, 2, 4) + 1), -1);
  s->read_at(h, 0, raw.data(), static_cast<std::int64_t>(raw.size()));
  for (std::int64_t k = 0; k < 160; ++k) {
    const auto src = vector_elem(k, 4, 1, 2);
    check(raw[static_cast<std::size_t>(vector_elem(k, 8, 2, 4))] == mem[static_cast<std::size_t>(src)],
          "element " + std::to_string(k) + " placed per file and memory patterns");
  }
  check(raw[2] == 0 && raw[3] == 0, "holes stay zero");
  // Scatter back through the same patterns.
  s->set_view(h, 0, dt::kInt, Datatype::vector(8, 2, 4, dt::kInt));
  std::vector<int> back(mem.size(), -7);
  s->read(h, back.data(), 40, mt);
  for (std::int64_t k = 0; k < 160; ++k) {
    const auto at = static_cast<std::size_t>(vector_elem(k, 4, 1, 2));
    check(back[at] == mem[at], "scattered read matches");
  }
  check(back[1] == -7, "memory holes untouched");
  s->close(h);
  s->remove(f);
}

void filecontrol(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("fc");
  auto h = s->open(f, mode::rdwr | mode::create);
  s->set_view(h, 0, dt::kInt, dt::kInt);
  auto data = ints(0, 1000);
  s->write(h, data.data(), 1000);
  check(s->get_position(h) == 1000, "position after write");
  check(s->get_size(h) == 4000, "size after write");
  s->seek(h, 10, Whence::set);
  s->seek(h, 5, Whence::cur);
  check(s->get_position(h) == 15, "seek additivity");
  check(s->seek(h, -1, Whence::end) == 999, "seek from end");
  s->preallocate(h, 100);
  check(s->get_size(h) == 4000, "preallocate never truncates");
  s->preallocate(h, 8000);
  check(s->get_size(h) == 8000, "preallocate extends");
  s->set_size(h, 2000);
  check(s->get_size(h) == 2000, "set_size truncates");
  std::vector<int> back(1000, -1);
  check(s->read_at(h, 0, back.data(), 1000).bytes == 2000, "read clipped at the new size");
  check(back[499] == 499 && back[500] == -1, "truncated contents");
  s->set_view(h, 40, dt::kInt, Datatype::vector(3, 2, 5, dt::kInt));
  for (std::int64_t k = 0; k < 20; ++k) {
    check(s->get_byte_offset(h, k) == 40 + 4 * vector_elem(k, 3, 2, 5), "get_byte_offset through the view");
  }
  check(s->get_position(h) == 0, "set_view resets the position");
  expect_error(Errc::bad_whence, "bad whence", [&] { s->seek(h, 0, 9); });
  s->close(h);
  s->remove(f);
}

void localpointer(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("lp");
  auto h = s->open(f, mode::rdwr | mode::create);
  expect_error(Errc::etype_mismatch, "double etype over an int filetype",
               [&] { s->set_view(h, 0, dt::kDouble, Datatype::vector(2, 1, 2, dt::kInt)); });
  expect_error(Errc::etype_mismatch, "int etype over a char filetype",
               [&] { s->set_view(h, 0, dt::kInt, Datatype::contiguous(8, dt::kChar)); });
  bool rejected = false;
  try {
    s->set_view(h, 0, dt::kInt, Datatype::structure({1, 1}, {0, 8}, {dt::kInt, dt::kDouble}));
  } catch (const Error&) {
    rejected = true;
  }
  check(rejected, "mixed-type filetype rejected");
  expect_error(Errc::unsupported_representation, "non-native representation",
               [&] { s->set_view(h, 0, dt::kInt, dt::kInt, "external32"); });
  s->set_view(h, 8, dt::kInt, Datatype::vector(5, 1, 3, dt::kInt));
  for (int i = 0; i < 4; ++i) {
    auto chunk = ints(i * 10, 10);
    s->write(h, chunk.data(), 10);
  }
  check(s->get_position(h) == 40, "local pointer advanced by writes");
  s->seek(h, 0, Whence::set);
  std::vector<int> back(40);
  for (int i = 0; i < 4; ++i) s->read(h, back.data() + i * 10, 10);
  check(back == ints(0, 40), "read back through the holey view");
  s->set_view(h, 0, dt::kInt, dt::kInt);
  std::vector<int> raw(2 + static_cast<std::size_t>(vector_elem(39, 5, 1, 3)) + 1);
  s->read_at(h, 0, raw.data(), static_cast<std::int64_t>(raw.size()));
  for (std::int64_t k = 0; k < 40; ++k) {
    check(raw[static_cast<std::size_t>(2 + vector_elem(k, 5, 1, 3))] == k, "element at its view position");
  }
  check(raw[0] == 0 && raw[1] == 0 && raw[3] == 0 && raw[4] == 0, "displacement and holes untouched");
  s->close(h);
  s->remove(f);
}

void collective(const Ctx& c) {
  // Client r owns (r + 1) * 4 bytes of every period; periods are the sum.
  const int C = 3;
  const std::int64_t P = 4 + 8 + 12;
  const int periods = 200;
  const auto f = c.name("coll");
  std::vector<std::unique_ptr<Session>> ss;
  std::vector<Handle> hs;
  for (int r = 0; r < C; ++r) {
    ss.push_back(c.session());
    hs.push_back(ss.back()->open(f, mode::rdwr | mode::create));
  }
  std::vector<std::thread> ts;
  std::vector<std::string> errs(C);
  for (int r = 0; r < C; ++r) {
    ts.emplace_back([&, r] {
      try {
        const std::int64_t off = 4 * r * (r + 1) / 2;
        const std::int64_t len = (r + 1) * 4;
        auto ft = Datatype::structure({len}, {off}, {dt::kByte}, P);
        auto& s = *ss[static_cast<std::size_t>(r)];
        const auto h = hs[static_cast<std::size_t>(r)];
        s.set_view_all(h, 0, dt::kByte, ft, f, C);
        auto data = client::pattern_bytes(static_cast<std::uint64_t>(r) + 50, static_cast<std::uint64_t>(len * periods));
        // Interleaved writes of different sizes.
        for (std::int64_t at = 0, step = len * (r + 2); at < len * periods; at += step) {
          auto n = std::min(step, len * periods - at);
          s.write(h, data.data() + at, n);
        }
      } catch (const std::exception& e) {
        errs[static_cast<std::size_t>(r)] = e.what();
      }
    });
  }
  for (auto& t : ts) t.join();
  for (auto& e : errs) check(e.empty(), "collective writer: " + e);
  std::vector<std::uint8_t> all(static_cast<std::size_t>(P * periods));
  check(ss[0]->read_at(hs[0], 0, all.data(), 0).bytes == 0, "empty read");
  ss[0]->set_view(hs[0], 0, dt::kByte, dt::kByte);
  check(ss[0]->read_at(hs[0], 0, all.data(), P * periods).bytes == static_cast<std::uint64_t>(P * periods),
        "whole file read");
  for (int r = 0; r < C; ++r) {
    const std::int64_t off = 4 * r * (r + 1) / 2;
    const std::int64_t len = (r + 1) * 4;
    auto data = client::pattern_bytes(static_cast<std::uint64_t>(r) + 50, static_cast<std::uint64_t>(len * periods));
    for (int p = 0; p < periods; ++p) {
      for (std::int64_t b = 0; b < len; ++b) {
        check(all[static_cast<std::size_t>(p * P + off + b)] == data[static_cast<std::size_t>(p * len + b)],
              "interleaved byte of client " + std::to_string(r));
      }
    }
  }
  // Members that disagree on the etype are refused.
  std::string other_err;
  std::thread other([&] {
    try {
      ss[1]->set_view_all(hs[1], 0, dt::kByte, dt::kByte, f + "_bad", 2);
    } catch (const Error& e) {
      other_err = errc_name(e.code());
    }
  });
  bool refused = false;
  try {
    ss[0]->set_view_all(hs[0], 0, dt::kInt, dt::kInt, f + "_bad", 2);
  } catch (const Error& e) {
    refused = e.code() == Errc::etype_mismatch;
  }
  other.join();
  check(refused && other_err == errc_name(Errc::etype_mismatch), "collective etype mismatch detected");
  for (int r = 0; r < C; ++r) ss[static_cast<std::size_t>(r)]->close(hs[static_cast<std::size_t>(r)]);
  ss[0]->remove(f);
}

void nb_rdwr(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("nbrw");
  auto h = s->open(f, mode::rdwr | mode::create);
  const int n = 50000;
  auto a = client::pattern_bytes(1, n), b = client::pattern_bytes(2, n);
  auto wa = s->iwrite(h, a.data(), n);
  auto wb = s->iwrite(h, b.data(), n);
  check(s->get_position(h) == 2 * n, "positions reserved at issue");
  check(s->wait(wa).bytes == n, "first iwrite");
  client::IoStatus st;
  while (!s->test(wb, st)) std::this_thread::yield();
  check(st.bytes == n && st.file_ref == h, "test reports completion");
  std::vector<std::uint8_t> ra(n), rb(n);
  auto qa = s->iread_at(h, 0, ra.data(), n);
  auto qb = s->iread_at(h, n, rb.data(), n);
  check(s->wait(qb).bytes == n && s->wait(qa).bytes == n, "ireads complete");
  check(ra == a && rb == b, "non-blocking round trip");
  std::vector<std::uint8_t> blocking(n);
  s->read_at(h, 0, blocking.data(), n);
  check(blocking == ra, "iread equals read");
  expect_error(Errc::unknown_request, "wait on a finished request", [&] { s->wait(qa); });
  s->close(h);
  s->remove(f);
}

void nb_localpointer(const Ctx& c) {
  auto s = c.session();
  const auto f = c.name("nblp");
  auto h = s->open(f, mode::rdwr | mode::create);
  s->set_view(h, 4, dt::kInt, Datatype::vector(4, 3, 7, dt::kInt));
  std::vector<std::vector<int>> parts;
  std::vector<client::IoRequest> reqs;
  for (int i = 0; i < 5; ++i) parts.push_back(ints(i * 30, 30));
  for (auto& p : parts) reqs.push_back(s->iwrite(h, p.data(), 30));
  for (auto& r : reqs) s->wait(r);
  check(s->get_position(h) == 150, "pointer after five iwrites");
  s->seek(h, 0, Whence::set);
  std::vector<std::vector<int>> back(5, std::vector<int>(30, -1));
  reqs.clear();
  for (auto& b : back) reqs.push_back(s->iread(h, b.data(), 30));
  for (auto& r : reqs) {
    auto st = s->wait(r);
    check(Session::get_count(st, dt::kInt) == 30, "count of each iread");
  }
  for (int i = 0; i < 5; ++i) check(back[static_cast<std::size_t>(i)] == parts[static_cast<std::size_t>(i)], "ireads in issue order");
  s->close(h);
  s->remove(f);
}

using Suite = void (*)(const Ctx&);

const std::vector<std::pair<std::string, Suite>>& suites() {
  static const std::vector<std::pair<std::string, Suite>> all = {
      {"openmodes", openmodes},     {"manyopens", manyopens},   {"openclose", openclose},
      {"readwrite", readwrite},     {"rdwr", rdwr},             {"filecontrol", filecontrol},
      {"localpointer", localpointer}, {"collective", collective}, {"nb_rdwr", nb_rdwr},
      {"nb_localpointer", nb_localpointer}};
  return all;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : suites()) out.push_back(name);
  return out;
}

std::vector<SuiteResult> run_regression(net::Network& network, const config::ClusterConfig& cfg,
                                        const std::string& prefix) {
  std::vector<SuiteResult> out;
  for (const auto& [name, fn] : suites()) {
    SuiteResult r{name, false, {}};
    try {
      fn(Ctx{network, cfg, prefix + "_" + name});
      r.passed = true;
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SuiteResult> run_regression_local(const config::ClusterConfig& cfg, std::size_t servers) {
  auto sub = cfg.first(servers);
  net::LoopbackNetwork network;
  server::Cluster cluster(sub, network);
  auto out = run_regression(network, sub, "regress" + std::to_string(servers));
  cluster.stop();
  return out;
}

}  // namespace vipio::bench
