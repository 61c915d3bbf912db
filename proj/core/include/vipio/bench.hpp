#pragma once

// Benchmark workloads and the regression suites.
//
// A bench spec is JSON:
//
//   {
//     "file_size": 8388608,          bytes per file
//     "clients": 4,
//     "pattern": "contiguous",       contiguous | view | distribution
//     "filetype": "...",             view: datatype text, {rank} and {size} substituted
//     "etype": "byte",               view / distribution etype
//     "descriptor": [...],           distribution: flat runtime descriptor
//     "iterations": 50,
//     "rotate_files": 10,
//     "barrier_sync": true,
//     "record_messages": true,
//     "servers": [1, 2, 4],          server counts to sweep (loopback only)
//     "hints": false                 create files with a file-administration hint
//   }
//
// Each client reads its own part of the file: a contiguous slice, the
// bytes of its view, or its process view of the distribution.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "vipio/config.hpp"
#include "vipio/transport.hpp"

namespace vipio::bench {

enum class Pattern { contiguous, view, distribution };

struct BenchSpec {
  std::uint64_t file_size = 8 << 20;
  std::uint32_t clients = 4;
  Pattern pattern = Pattern::contiguous;
  std::string filetype;
  std::string etype = "byte";
  std::vector<std::int64_t> descriptor;
  std::uint32_t iterations = 1;
  std::uint32_t rotate_files = 1;
  bool barrier_sync = true;
  bool record_messages = true;
  std::vector<std::size_t> servers;
  bool hints = false;
};

// InvalidArguments for unknown fields' types, iterations or rotate_files of
// 0, or a missing filetype/descriptor for the chosen pattern.
BenchSpec parse_spec(std::string_view json);
BenchSpec load_spec(const std::filesystem::path& path);

// Times are seconds per iteration, measured from the start barrier to the
// slowest client's finish. Message counts and bytes are totals over all
// clients and iterations.
struct BenchRow {
  std::uint32_t clients = 0;
  std::size_t servers = 0;
  double max = 0, min = 0, mean = 0, variance = 0;
  std::uint64_t acks = 0, datas = 0, bytes = 0;
};

// Runs the spec against every server count of the sweep, each on a fresh
// in-process loopback cluster built from the first n servers of `cfg`.
std::vector<BenchRow> run_bench(const config::ClusterConfig& cfg, const BenchSpec& spec);
// Runs once against an already running cluster reachable through `network`.
BenchRow run_bench_on(net::Network& network, const config::ClusterConfig& cfg, const BenchSpec& spec);

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<std::string> suite_names();
// Runs every suite against a running cluster. Files are named with `prefix`.
std::vector<SuiteResult> run_regression(net::Network& network, const config::ClusterConfig& cfg,
                                        const std::string& prefix = "regress");
// Fresh in-process loopback cluster of the first n servers, then the suites.
std::vector<SuiteResult> run_regression_local(const config::ClusterConfig& cfg, std::size_t servers);

}  // namespace vipio::bench
