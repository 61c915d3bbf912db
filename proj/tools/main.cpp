// vipio: run servers, benchmarks and the regression suites from a config file.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "vipio/bench.hpp"
#include "vipio/client.hpp"
#include "vipio/config.hpp"
#include "vipio/server.hpp"

using namespace vipio;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

std::unique_ptr<client::Session> connect(net::Network& network, const config::ClusterConfig& cfg) {
  auto s = std::make_unique<client::Session>(network, cfg);
  s->connect(0);
  return s;
}

int serve(const config::ClusterConfig& cfg, std::vector<net::NodeId> ids) {
  if (ids.empty()) ids = cfg.server_ids();
  net::SocketNetwork network(cfg.addresses());
  std::vector<std::unique_ptr<server::Server>> servers;
  for (auto id : ids) {
    cfg.server(id);
    servers.push_back(std::make_unique<server::Server>(cfg, id, network.attach(id)));
    servers.back()->start();
    std::cerr << "server " << id << " listening on " << cfg.server(id).address << "\n";
  }
  for (auto& s : servers) s->wait();
  for (auto& s : servers) s->stop();
  return kOk;
}

int bench_cmd(const config::ClusterConfig& cfg, const std::string& spec_path, const std::string& out, bool remote) {
  auto spec = bench::load_spec(spec_path);
  std::vector<bench::BenchRow> rows;
  if (remote) {
    net::SocketNetwork network(cfg.addresses());
    rows.push_back(bench::run_bench_on(network, cfg, spec));
  } else {
    rows = bench::run_bench(cfg, spec);
  }
  if (out.empty() || out == "-") {
    bench::write_csv(std::cout, rows);
  } else {
    std::ofstream f(out);
    if (!f) throw Error(Errc::io_failure, "cannot write " + out);
    bench::write_csv(f, rows);
  }
  return kOk;
}

int regress(const config::ClusterConfig& cfg, std::vector<std::size_t> sweep, bool remote) {
  bool ok = true;
  auto report = [&](const std::string& topo, const std::vector<bench::SuiteResult>& results) {
    for (const auto& r : results) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << topo << " " << r.name;
      if (!r.passed) std::cout << ": " << r.detail;
      std::cout << "\n";
      ok = ok && r.passed;
    }
  };
  if (remote) {
    net::SocketNetwork network(cfg.addresses());
    report(std::to_string(cfg.servers.size()) + "-server", bench::run_regression(network, cfg));
  } else {
    if (sweep.empty()) {
      for (std::size_t n : {1, 2, 4}) {
        if (n <= cfg.servers.size()) sweep.push_back(n);
      }
    }
    for (auto n : sweep) report(std::to_string(n) + "-server", bench::run_regression_local(cfg, n));
  }
  return ok ? kOk : kFailure;
}

int inspect(const config::ClusterConfig& cfg, const std::string& file) {
  net::SocketNetwork network(cfg.addresses());
  auto s = connect(network, cfg);
  std::cout << s->inspect(file) << "\n";
  s->disconnect();
  return kOk;
}

int shutdown(const config::ClusterConfig& cfg) {
  net::SocketNetwork network(cfg.addresses());
  auto s = connect(network, cfg);
  s->shutdown_cluster();
  return kOk;
}

int run_script(const config::ClusterConfig& cfg, const std::string& path) {
  net::SocketNetwork network(cfg.addresses());
  auto s = connect(network, cfg);
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_arguments, "cannot read " + path);
  const int failures = client::run_script(*s, in, std::cout);
  s->disconnect();
  return failures == 0 ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vipio parallel I/O servers, benchmarks and regression suites"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "cluster config file")->required();

  auto* serve_cmd = app.add_subcommand("serve", "run servers of the config until shut down");
  std::vector<net::NodeId> ids;
  serve_cmd->add_option("--id", ids, "run only these server ids (default: all)");

  auto* bench_sub = app.add_subcommand("bench", "run a benchmark spec and write a CSV report");
  std::string spec_path, out_path;
  bool remote = false;
  bench_sub->add_option("--spec", spec_path, "bench spec JSON")->required();
  bench_sub->add_option("--out", out_path, "CSV output (default: stdout)");
  bench_sub->add_flag("--connect", remote, "use the running socket cluster instead of in-process clusters");

  auto* regress_cmd = app.add_subcommand("regress", "run the regression suites");
  std::vector<std::size_t> sweep;
  regress_cmd->add_option("--servers", sweep, "server counts to test in process (default: 1 2 4)");
  regress_cmd->add_flag("--connect", remote, "use the running socket cluster");

  auto* inspect_cmd = app.add_subcommand("inspect", "dump a file's layout from the system controller");
  std::string file;
  inspect_cmd->add_option("--file", file, "file name")->required();

  auto* shutdown_cmd = app.add_subcommand("shutdown", "drain and stop the running cluster");

  auto* run_cmd = app.add_subcommand("run", "execute a command file against the running cluster");
  std::string script;
  run_cmd->add_option("--script", script, "command file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  config::ClusterConfig cfg;
  try {
    cfg = config::load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "vipio: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*serve_cmd) return serve(cfg, ids);
    if (*bench_sub) return bench_cmd(cfg, spec_path, out_path, remote);
    if (*regress_cmd) return regress(cfg, sweep, remote);
    if (*inspect_cmd) return inspect(cfg, file);
    if (*shutdown_cmd) return shutdown(cfg);
    if (*run_cmd) return run_script(cfg, script);
  } catch (const Error& e) {
    std::cerr << "vipio: " << e.what() << "\n";
    return e.code() == Errc::config_error ? kConfigError : kFailure;
  } catch (const std::exception& e) {
    std::cerr << "vipio: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
