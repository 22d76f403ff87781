#include <csignal>
#include <iostream>
#include <pthread.h>
#include <sstream>

#include <CLI11.hpp>

#include "otmcp/bench/report.hpp"
#include "otmcp/bench/runner.hpp"
#include "otmcp/modbus/adapter.hpp"
#include "otmcp/modbus/mock.hpp"
#include "otmcp/mqtt/adapter.hpp"
#include "otmcp/mqtt/mock.hpp"
#include "otmcp/process.hpp"
#include "otmcp/ua/adapter.hpp"
#include "otmcp/ua/mock.hpp"

using namespace otmcp;

namespace {

sigset_t stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  return set;
}

/// Runs `start`, blocks until SIGINT or SIGTERM, then runs `stop`.
template <typename Start, typename Stop>
int serve_until_signal(const std::string& what, Start start, Stop stop) {
  const auto set = stop_signals();
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  try {
    const auto port = start();
    std::cerr << what << " listening on port " << port << '\n';
  } catch (const std::exception& e) {
    std::cerr << what << ": " << e.what() << '\n';
    return 2;
  }
  int sig = 0;
  sigwait(&set, &sig);
  stop();
  return 0;
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int print_checks(const std::vector<bench::Check>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << c.detail << '\n';
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Industrial protocol MCP adapters, mock endpoints and benchmark harness"};
  app.require_subcommand(1);
  int exit_code = 0;

  // mock
  auto* mock = app.add_subcommand("mock", "Run a mock endpoint until interrupted");
  mock->require_subcommand(1);
  std::string host = "127.0.0.1";
  int port = 0;
  bool no_sim = false;
  double tick_hz = 1.0;
  std::string frame_log;
  std::string group_id{sparkplug::Defaults::group_id};
  std::string edge_node_id{sparkplug::Defaults::edge_node_id};
  for (auto* m : {mock->add_subcommand("modbus", "Modbus TCP plant mock"),
                  mock->add_subcommand("mqtt", "MQTT broker with Sparkplug B simulator"),
                  mock->add_subcommand("ua", "Node-model plant mock")}) {
    m->add_option("--host", host, "Bind address");
    m->add_option("--port", port, "Listen port (default per protocol)")->check(CLI::Range(0, 65535));
    m->add_flag("--no-sim", no_sim, "Disable the simulation loop");
    m->add_option("--tick-hz", tick_hz, "Simulation rate")->check(CLI::PositiveNumber);
  }
  mock->get_subcommand("modbus")->add_option("--frame-log", frame_log, "Append every request frame to this file");
  mock->get_subcommand("mqtt")->add_option("--group-id", group_id, "Sparkplug group id");
  mock->get_subcommand("mqtt")->add_option("--edge-node-id", edge_node_id, "Sparkplug edge node id");

  mock->get_subcommand("modbus")->callback([&] {
    modbus::MockOptions o;
    o.bind = {host, static_cast<std::uint16_t>(port ? port : 1502)};
    o.simulate = !no_sim;
    o.tick_hz = tick_hz;
    o.frame_log_path = frame_log;
    modbus::ModbusMock m(o);
    exit_code = serve_until_signal("modbus mock", [&] { m.start(); return m.port(); }, [&] { m.stop(); });
  });
  mock->get_subcommand("mqtt")->callback([&] {
    mqtt::MqttMockOptions o;
    o.bind = {host, static_cast<std::uint16_t>(port ? port : 1883)};
    o.simulate = !no_sim;
    o.tick_hz = tick_hz;
    o.group_id = group_id;
    o.edge_node_id = edge_node_id;
    mqtt::MqttMock m(o);
    exit_code = serve_until_signal("mqtt mock", [&] { m.start(); return m.port(); }, [&] { m.stop(); });
  });
  mock->get_subcommand("ua")->callback([&] {
    ua::MockOptions o;
    o.bind = {host, static_cast<std::uint16_t>(port ? port : 4840)};
    o.simulate = !no_sim;
    o.tick_hz = tick_hz;
    ua::UaMock m(o);
    exit_code = serve_until_signal("ua mock", [&] { m.start(); return m.port(); }, [&] { m.stop(); });
  });

  // adapter
  auto* adapter = app.add_subcommand("adapter", "Run an MCP stdio adapter until stdin closes");
  adapter->require_subcommand(1);
  adapter->add_subcommand("modbus", "Modbus TCP adapter (20 tools)")->callback([&] {
    exit_code = modbus::run_stdio_server();
  });
  adapter->add_subcommand("mqtt", "MQTT and Sparkplug B adapter (15 tools)")->callback([&] {
    exit_code = mqtt::run_stdio_server();
  });
  adapter->add_subcommand("ua", "Node-model adapter (7 tools)")->callback([&] { exit_code = ua::run_stdio_server(); });

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Benchmark harness");
  bench_cmd->require_subcommand(1);
  bench::BenchConfig cfg;
  std::string suite = "all";
  std::string tasks;
  double reconnect_initial = 0.0;
  auto* run = bench_cmd->add_subcommand("run", "Run benchmark suites and write JSON artifacts");
  run->add_option("--suite", suite, "normal|fault|stress|recovery|all")
      ->check(CLI::IsMember({"normal", "fault", "stress", "recovery", "all"}));
  run->add_option("--out", cfg.out_dir, "Artifact directory");
  run->add_option("--seed-note", cfg.seed_note, "Free-form note stored in the manifest");
  run->add_option("--tasks", tasks, "Comma-separated task ids to run (default: all of the suite)");
  run->add_option("--repetitions", cfg.repetitions, "Override repetitions per task")->check(CLI::NonNegativeNumber);
  run->add_option("--host", cfg.host, "Address the mocks bind to");
  run->add_option("--modbus-port", cfg.modbus_port, "Read-write Modbus mock port");
  run->add_option("--modbus-ro-port", cfg.modbus_ro_port, "Read-only Modbus mock port");
  run->add_option("--mqtt-port", cfg.mqtt_port, "MQTT mock port");
  run->add_option("--ua-port", cfg.ua_port, "Node-model mock port");
  auto* reconnect_opt = run->add_option("--mqtt-reconnect-initial", reconnect_initial,
                                        "First MQTT reconnect delay in seconds for the adapter session")
                            ->check(CLI::PositiveNumber);
  run->add_flag("--fault-skip-uint16-check", cfg.fault_skip_uint16_check,
                "Disable the Modbus uint16 range check (falsifiability run)");
  run->add_option("--stress-downtime-ms", cfg.timing.stress_downtime_ms, "Endpoint downtime in restart tasks");
  run->add_option("--stress-window-ms", cfg.timing.stress_window_ms, "Wait after restart before the final read");
  run->add_option("--recovery-window-ms", cfg.timing.recovery_window_ms, "Same-session recovery window");
  run->callback([&] {
    if (suite != "all") cfg.suites = {*bench::parse_suite(suite)};
    cfg.tasks = split(tasks);
    if (reconnect_opt->count() > 0) cfg.mqtt_reconnect_initial_s = reconnect_initial;
    cfg.binary = self_executable();
    try {
      const auto summary = bench::run_benchmark(cfg);
      std::cout << "wrote " << summary.total_runs << " runs (" << summary.passed << " passed, "
                << summary.unexpected << " unexpected) to " << cfg.out_dir.string() << '\n';
      exit_code = summary.unexpected == 0 ? 0 : 1;
    } catch (const bench::SetupError& e) {
      std::cerr << "bench run: " << e.what() << '\n';
      exit_code = 2;
    }
  });

  std::filesystem::path in_dir;
  std::filesystem::path report_out;
  auto* report = bench_cmd->add_subcommand("report", "Render Markdown and CSV tables from artifacts");
  report->add_option("--in", in_dir, "Artifact directory")->required();
  report->add_option("--out", report_out, "Report directory")->required();
  report->callback([&] {
    try {
      bench::write_report(bench::load_artifacts(in_dir), report_out);
    } catch (const std::exception& e) {
      std::cerr << "bench report: " << e.what() << '\n';
      exit_code = 2;
    }
  });

  auto* verify = bench_cmd->add_subcommand("verify", "Check acceptance criteria against artifacts");
  verify->add_option("--in", in_dir, "Artifact directory")->required();
  verify->callback([&] {
    try {
      exit_code = print_checks(bench::verify(bench::load_artifacts(in_dir)));
    } catch (const std::exception& e) {
      std::cerr << "bench verify: " << e.what() << '\n';
      exit_code = 2;
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return exit_code;
}
