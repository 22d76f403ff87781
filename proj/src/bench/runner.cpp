#include "otmcp/bench/runner.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <thread>
#include <unistd.h>

#include "otmcp/bench/oracle.hpp"
#include "otmcp/mcp_client.hpp"
#include "otmcp/net.hpp"
#include "otmcp/process.hpp"

namespace otmcp::bench {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

namespace {

double ms_since(Clock::time_point origin, Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(t - origin).count();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  ::gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

bool wait_port_closed(const net::Endpoint& ep, milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  do {
    try {
      net::tcp_connect(ep, milliseconds(100));
    } catch (const net::NetError&) {
      return true;
    }
    std::this_thread::sleep_for(milliseconds(10));
  } while (Clock::now() < deadline);
  return false;
}

/// One mock endpoint owned by the harness as a child process.
class MockProcess {
 public:
  MockProcess(std::string name, std::vector<std::string> argv, net::Endpoint ep, fs::path log)
      : name_(std::move(name)), argv_(std::move(argv)), ep_(std::move(ep)), log_(std::move(log)) {}

  void start() {
    if (!wait_port_closed(ep_, milliseconds(2000))) {
      throw SetupError(name_ + " mock: port " + ep_.to_string() + " is already in use");
    }
    SpawnOptions o;
    o.argv = argv_;
    o.stderr_path = log_.string();
    o.batch_scheduling = true;
    child_ = ChildProcess::spawn(o);
    if (!net::wait_port_open(ep_, milliseconds(5000))) {
      child_.stop(milliseconds(500));
      throw SetupError(name_ + " mock did not open " + ep_.to_string());
    }
  }

  void stop() {
    child_.stop(milliseconds(2000));
    wait_port_closed(ep_, milliseconds(200));
  }

  const net::Endpoint& endpoint() const noexcept { return ep_; }

 private:
  std::string name_;
  std::vector<std::string> argv_;
  net::Endpoint ep_;
  fs::path log_;
  ChildProcess child_;
};

class Harness {
 public:
  Harness(const BenchConfig& config, fs::path work) : cfg_(config), work_(std::move(work)) {}

  ~Harness() {
    sessions_.clear();
    for (auto& [f, m] : mocks_) m->stop();
    if (ro_mock_) ro_mock_->stop();
  }

  void setup() {
    auto mock = [&](const std::string& kind, std::uint16_t port, std::vector<std::string> extra) {
      std::vector<std::string> argv{cfg_.binary, "mock", kind, "--host", cfg_.host, "--port", std::to_string(port)};
      argv.insert(argv.end(), extra.begin(), extra.end());
      return std::make_unique<MockProcess>(kind, std::move(argv), net::Endpoint{cfg_.host, port},
                                           work_ / ("mock-" + kind + "-" + std::to_string(port) + ".log"));
    };
    mocks_[Family::modbus] = mock("modbus", cfg_.modbus_port, {});
    mocks_[Family::mqtt] = mock("mqtt", cfg_.mqtt_port, {});
    mocks_[Family::ua] = mock("ua", cfg_.ua_port, {});
    ro_frame_log_ = work_ / "modbus_ro_frames.log";
    ro_mock_ = mock("modbus", cfg_.modbus_ro_port, {"--frame-log", ro_frame_log_.string()});
    for (auto& [f, m] : mocks_) m->start();
    ro_mock_->start();
    for (const char* name : {session::modbus_rw, session::modbus_ro, session::mqtt, session::ua}) {
      sessions_[name] = open_session(name, name);
    }
  }

  json run_task(const TaskSpec& task, int rep) {
    json record{{"task_id", task.id},
                {"suite", to_string(task.suite)},
                {"family", to_string(task.family)},
                {"repetition", rep},
                {"started_at", utc_now()}};
    const bool restarts = std::any_of(task.steps.begin(), task.steps.end(),
                                      [](const Step& s) { return s.kind == StepKind::stop_mock; });
    if (restarts) settle(task.family);
    const auto origin = Clock::now();
    json calls = json::array();
    json events = json::array();
    double latency = 0.0;

    for (std::size_t i = 0; i < task.steps.size();) {
      const auto& step = task.steps[i];
      if (step.kind != StepKind::call) {
        events.push_back(run_action(step, origin));
        ++i;
        continue;
      }
      std::size_t end = i + 1;
      if (step.parallel) {
        while (end < task.steps.size() && task.steps[end].kind == StepKind::call && task.steps[end].parallel) ++end;
      }
      std::vector<json> group = end - i == 1 ? std::vector<json>{run_call(i, step, rep, origin)}
                                             : run_parallel(task.steps, i, end, rep, origin);
      double group_latency = 0.0;
      for (auto& c : group) {
        group_latency = std::max(group_latency, c["harness_latency_ms"].get<double>());
        calls.push_back(std::move(c));
      }
      latency += group_latency;
      i = end;
    }
    record["calls"] = std::move(calls);
    record["events"] = std::move(events);
    record["latency_ms"] = latency;
    finish(record);
    return record;
  }

  json run_recovery(const TaskSpec& task, int rep) {
    const auto f = task.family;
    const auto name = session_of(f);
    const auto tool = probe_tool(f);
    settle(f);
    json record{{"task_id", task.id},
                {"suite", to_string(task.suite)},
                {"family", to_string(f)},
                {"repetition", rep},
                {"started_at", utc_now()}};
    const auto origin = Clock::now();
    json calls = json::array();
    json events = json::array();
    json phases = json::object();
    auto probe = [&](mcp::Session& s, const std::string& session_name, const char* expect, const char* phase) {
      Step step;
      step.session = session_name;
      step.tool = tool;
      step.expect = expect;
      auto c = call_on(s, calls.size(), step, 0, origin);
      c["phase"] = phase;
      const bool ok = outcome_matches(c);
      calls.push_back(std::move(c));
      return ok;
    };

    json r{{"trial", rep}};
    r["baseline_ok"] = probe(*sessions_.at(name), name, kExpectSuccess, "baseline");
    phases["stop_ms"] = ms_since(origin, Clock::now());
    mocks_.at(f)->stop();
    phases["stopped_ms"] = ms_since(origin, Clock::now());
    r["outage_detected"] = probe(*sessions_.at(name), name, kExpectUnavailable, "outage");
    r["detect_latency_ms"] = calls.back()["harness_latency_ms"];
    phases["detected_ms"] = ms_since(origin, Clock::now());

    std::this_thread::sleep_for(milliseconds(cfg_.timing.recovery_downtime_ms));
    phases["restart_ms"] = ms_since(origin, Clock::now());
    mocks_.at(f)->start();
    const auto ready = Clock::now();
    phases["ready_ms"] = ms_since(origin, ready);

    bool same = false;
    int polls = 0;
    const auto deadline = ready + milliseconds(cfg_.timing.recovery_window_ms);
    while (!same) {
      ++polls;
      same = probe(*sessions_.at(name), name, kExpectSuccess, "same_session");
      if (same || Clock::now() + milliseconds(cfg_.timing.recovery_poll_ms) > deadline) break;
      std::this_thread::sleep_for(milliseconds(cfg_.timing.recovery_poll_ms));
    }
    phases["same_session_ms"] = ms_since(origin, Clock::now());
    r["same_session_recovered"] = same;
    r["same_session_polls"] = polls;

    bool fresh = false;
    try {
      auto s = open_session(name, name + "-fresh-" + std::to_string(rep));
      fresh = probe(*s, name + "-fresh", kExpectSuccess, "fresh_session");
    } catch (const mcp::SessionError& e) {
      r["fresh_session_error"] = e.what();
    }
    phases["fresh_session_ms"] = ms_since(origin, Clock::now());
    r["fresh_session_recovered"] = fresh;
    r["phases"] = std::move(phases);

    record["calls"] = std::move(calls);
    record["events"] = std::move(events);
    record["recovery"] = std::move(r);
    record["latency_ms"] = record["recovery"]["detect_latency_ms"];
    finish(record);
    return record;
  }

  json guard_audit() {
    const std::vector<std::pair<std::string, json>> writes{
        {"write_register", {{"address", 10}, {"value", 1}}},
        {"write_registers", {{"address", 10}, {"values", {1, 2}}}},
        {"write_coil", {{"address", 0}, {"value", true}}},
        {"write_coils", {{"address", 0}, {"values", {true, false}}}},
        {"mask_write_register", {{"address", 10}, {"and_mask", 0}, {"or_mask", 1}}},
        {"write_register_verified", {{"address", 10}, {"value", 1}}},
        {"write_typed", {{"address", 20}, {"datatype", "float32"}, {"value", 1.5}}},
        {"write_alias", {{"alias", "valve_position"}, {"value", 10}}}};
    auto& ro = *sessions_.at(session::modbus_ro);
    bool all_denied = true;
    json calls = json::array();
    for (const auto& [tool, args] : writes) {
      const auto res = ro.call(tool, args);
      const bool denied = res.envelope.error_class() == ErrorClass::writes_disabled;
      all_denied = all_denied && denied;
      calls.push_back({{"tool", tool}, {"denied", denied}});
    }
    const bool reads_ok = ro.call("ping", json::object()).envelope.ok();

    std::size_t frames = 0;
    std::size_t write_frames = 0;
    std::ifstream in(ro_frame_log_);
    const std::regex line_re(R"(txn=\d+ unit=\d+ fc=0x([0-9A-Fa-f]{2}))");
    for (std::string line; std::getline(in, line);) {
      std::smatch m;
      if (!std::regex_search(line, m, line_re)) continue;
      ++frames;
      if (is_write_function(std::stoi(m[1].str(), nullptr, 16))) ++write_frames;
    }
    return {{"session", session::modbus_ro},
            {"write_tools_called", writes.size()},
            {"all_denied", all_denied},
            {"read_ok", reads_ok},
            {"frames_total", frames},
            {"write_frames", write_frames},
            {"frame_log", "modbus_ro_frames.log"},
            {"calls", calls}};
  }

  const fs::path& ro_frame_log() const noexcept { return ro_frame_log_; }

 private:
  std::unique_ptr<mcp::Session> open_session(const std::string& kind, const std::string& label) {
    mcp::LaunchSpec spec;
    std::string family = kind == session::modbus_ro ? "modbus" : kind == session::modbus_rw ? "modbus" : kind;
    spec.argv = {cfg_.binary, "adapter", family};
    spec.stderr_path = (work_ / ("adapter-" + label + ".log")).string();
    spec.batch_scheduling = true;
    if (family == "modbus") {
      const bool ro = kind == session::modbus_ro;
      spec.env["MODBUS_HOST"] = cfg_.host;
      spec.env["MODBUS_PORT"] = std::to_string(ro ? cfg_.modbus_ro_port : cfg_.modbus_port);
      spec.env["MODBUS_WRITES_ENABLED"] = ro ? "false" : "true";
      if (cfg_.fault_skip_uint16_check) spec.env["OTMCP_FAULT_SKIP_UINT16_CHECK"] = "1";
    } else if (family == "mqtt") {
      spec.env["MQTT_HOST"] = cfg_.host;
      spec.env["MQTT_PORT"] = std::to_string(cfg_.mqtt_port);
      spec.env["MQTT_CLIENT_ID"] = "otmcp-bench-" + label + "-" + std::to_string(::getpid());
      spec.env["SPARKPLUG_EDGE_NODE_ID"] = "bench-edge";
      if (cfg_.mqtt_reconnect_initial_s) {
        spec.env["MQTT_RECONNECT_INITIAL_S"] = std::to_string(*cfg_.mqtt_reconnect_initial_s);
      }
    } else {
      spec.env["UA_HOST"] = cfg_.host;
      spec.env["UA_PORT"] = std::to_string(cfg_.ua_port);
    }
    try {
      return mcp::Session::open(spec);
    } catch (const mcp::SessionError& e) {
      throw SetupError("cannot open the " + label + " session: " + e.what());
    }
  }

  json call_record(std::size_t index, const Step& step, const json& args, const mcp::CallResult& res,
                   Clock::time_point origin) {
    return json{{"step", index},
                {"session", step.session},
                {"tool", step.tool},
                {"args", args},
                {"expect", step.expect},
                {"parallel", step.parallel},
                {"envelope", res.envelope.to_json()},
                {"harness_latency_ms", res.harness_latency_ms},
                {"started_ms", ms_since(origin, res.started)},
                {"finished_ms", ms_since(origin, res.finished)}};
  }

  json call_on(mcp::Session& s, std::size_t index, const Step& step, int rep, Clock::time_point origin) {
    const json args = instantiate(step.args, rep);
    return call_record(index, step, args, s.call(step.tool, args), origin);
  }

  json run_call(std::size_t index, const Step& step, int rep, Clock::time_point origin) {
    return call_on(*sessions_.at(step.session), index, step, rep, origin);
  }

  /// Writes every request of a parallel group before collecting any reply.
  std::vector<json> run_parallel(const std::vector<Step>& steps, std::size_t first, std::size_t end, int rep,
                                 Clock::time_point origin) {
    std::vector<json> args;
    std::vector<mcp::Session*> targets;
    for (std::size_t k = first; k < end; ++k) {
      args.push_back(instantiate(steps[k].args, rep));
      targets.push_back(sessions_.at(steps[k].session).get());
    }
    std::vector<mcp::Session::InFlight> pending;
    pending.reserve(args.size());
    // Start the burst on a fresh time slice so all writes land together.
    std::this_thread::yield();
    for (std::size_t k = first; k < end; ++k) pending.push_back(targets[k - first]->begin(steps[k].tool, args[k - first]));
    std::vector<json> out;
    for (std::size_t k = first; k < end; ++k) {
      auto& s = *sessions_.at(steps[k].session);
      out.push_back(call_record(k, steps[k], args[k - first], s.finish(std::move(pending[k - first])), origin));
    }
    return out;
  }

  json run_action(const Step& step, Clock::time_point origin) {
    json ev{{"kind", to_json(step)["kind"]}, {"at_ms", ms_since(origin, Clock::now())}};
    switch (step.kind) {
      case StepKind::stop_mock:
        ev["target"] = to_string(step.target);
        mocks_.at(step.target)->stop();
        break;
      case StepKind::start_mock:
        ev["target"] = to_string(step.target);
        ev["downtime_ms"] = step.wait_ms;
        std::this_thread::sleep_for(milliseconds(step.wait_ms));
        mocks_.at(step.target)->start();
        break;
      case StepKind::wait:
        ev["ms"] = step.wait_ms;
        std::this_thread::sleep_for(milliseconds(step.wait_ms));
        break;
      case StepKind::call:
        break;
    }
    ev["done_ms"] = ms_since(origin, Clock::now());
    return ev;
  }

  /// Waits (unrecorded) until the family's probe succeeds so a restart task
  /// starts from a healthy endpoint.
  void settle(Family f) {
    const auto deadline = Clock::now() + milliseconds(8000);
    auto& s = *sessions_.at(session_of(f));
    while (Clock::now() < deadline) {
      if (s.call(probe_tool(f), json::object()).envelope.ok()) return;
      std::this_thread::sleep_for(milliseconds(100));
    }
  }

  static void finish(json& record) {
    const auto v = evaluate_oracle(record);
    record["pass"] = v.pass;
    record["failure_reason"] = v.pass ? json(nullptr) : json(v.reason);
  }

  const BenchConfig& cfg_;
  fs::path work_;
  std::map<Family, std::unique_ptr<MockProcess>> mocks_;
  std::unique_ptr<MockProcess> ro_mock_;
  fs::path ro_frame_log_;
  std::map<std::string, std::unique_ptr<mcp::Session>> sessions_;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

bool is_write_function(int fc) noexcept {
  return fc == 0x05 || fc == 0x06 || fc == 0x0F || fc == 0x10 || fc == 0x16 || fc == 0x17;
}

json to_json(const BenchConfig& c) {
  json suites = json::array();
  for (auto s : c.suites) suites.push_back(to_string(s));
  return {{"suites", suites},
          {"tasks", c.tasks},
          {"repetitions_override", c.repetitions},
          {"host", c.host},
          {"ports", {{"modbus", c.modbus_port}, {"modbus_ro", c.modbus_ro_port}, {"mqtt", c.mqtt_port}, {"ua", c.ua_port}}},
          {"mqtt_reconnect_initial_s", c.mqtt_reconnect_initial_s ? json(*c.mqtt_reconnect_initial_s) : json(1.0)},
          {"fault_skip_uint16_check", c.fault_skip_uint16_check},
          {"timing",
           {{"stress_downtime_ms", c.timing.stress_downtime_ms},
            {"stress_window_ms", c.timing.stress_window_ms},
            {"recovery_downtime_ms", c.timing.recovery_downtime_ms},
            {"recovery_window_ms", c.timing.recovery_window_ms},
            {"recovery_poll_ms", c.timing.recovery_poll_ms}}},
          {"seed_note", c.seed_note}};
}

BenchSummary run_benchmark(const BenchConfig& config) {
  std::vector<TaskSpec> selected;
  for (auto suite : kSuiteOrder) {
    if (std::find(config.suites.begin(), config.suites.end(), suite) == config.suites.end()) continue;
    for (auto t : load_plan()) {
      if (t.suite != suite) continue;
      if (!config.tasks.empty() && std::find(config.tasks.begin(), config.tasks.end(), t.id) == config.tasks.end()) {
        continue;
      }
      if (config.repetitions > 0) t.repetitions = config.repetitions;
      for (auto& s : t.steps) {
        if (s.kind == StepKind::start_mock) {
          s.wait_ms = suite == Suite::stress ? config.timing.stress_downtime_ms : config.timing.recovery_downtime_ms;
        } else if (s.kind == StepKind::wait) {
          s.wait_ms = config.timing.stress_window_ms;
        }
      }
      selected.push_back(std::move(t));
    }
  }
  if (selected.empty()) throw SetupError("no tasks selected");
  if (config.binary.empty()) throw SetupError("no otmcp binary configured");

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw SetupError("cannot create " + config.out_dir.string() + ": " + ec.message());
  const fs::path work = config.out_dir / (".work-" + std::to_string(::getpid()));
  fs::remove_all(work, ec);
  fs::create_directories(work);

  json manifest{{"config", to_json(config)}, {"started_at", utc_now()}};
  std::map<Suite, json> artifacts;
  json guard = nullptr;
  BenchSummary summary;
  try {
    Harness h(config, work);
    h.setup();
    for (auto suite : kSuiteOrder) {
      json records = json::array();
      bool any = false;
      for (const auto& task : selected) {
        if (task.suite != suite) continue;
        any = true;
        for (int rep = 1; rep <= task.repetitions; ++rep) {
          auto rec = suite == Suite::recovery ? h.run_recovery(task, rep) : h.run_task(task, rep);
          const bool pass = rec["pass"].get<bool>();
          summary.passed += pass ? 1 : 0;
          summary.unexpected += pass == expected_pass(task.id, config.mqtt_reconnect_initial_s.value_or(1.0)) ? 0 : 1;
          records.push_back(std::move(rec));
        }
        std::size_t passed = 0;
        for (const auto& r : records) {
          if (r["task_id"] == task.id && r["pass"].get<bool>()) ++passed;
        }
        std::cerr << "[bench] " << task.id << ": " << passed << "/" << task.repetitions << " passed\n";
      }
      if (!any) continue;
      if (suite == Suite::normal) guard = h.guard_audit();
      summary.runs[std::string(to_string(suite))] = records.size();
      summary.total_runs += records.size();
      artifacts[suite] = std::move(records);
    }
  } catch (const SetupError&) {
    fs::remove_all(work, ec);
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(work, ec);
    throw SetupError(std::string("benchmark aborted: ") + e.what());
  }

  json plan = json::array();
  for (const auto& t : selected) plan.push_back(to_json(t));
  json files = json::array();
  json runs = json::object();
  for (const auto& [suite, records] : artifacts) {
    const auto name = std::string(to_string(suite)) + ".json";
    write_json(config.out_dir / name, records);
    files.push_back(name);
    runs[std::string(to_string(suite))] = records.size();
  }
  if (!guard.is_null()) {
    fs::copy_file(work / "modbus_ro_frames.log", config.out_dir / "modbus_ro_frames.log",
                  fs::copy_options::overwrite_existing, ec);
  }
  const fs::path logs = config.out_dir / "logs";
  fs::remove_all(logs, ec);
  fs::create_directories(logs, ec);
  for (const auto& entry : fs::directory_iterator(work, ec)) {
    if (entry.path().extension() == ".log" && entry.path().filename() != "modbus_ro_frames.log") {
      fs::rename(entry.path(), logs / entry.path().filename(), ec);
    }
  }
  fs::remove_all(work, ec);

  manifest["finished_at"] = utc_now();
  manifest["versions"] = {{"otmcp", "0.1.0"}, {"compiler", __VERSION__}, {"cxx_standard", __cplusplus}};
  manifest["plan"] = plan;
  manifest["runs"] = runs;
  manifest["total_runs"] = summary.total_runs;
  manifest["passed_runs"] = summary.passed;
  manifest["unexpected_runs"] = summary.unexpected;
  manifest["artifacts"] = files;
  manifest["guard_audit"] = guard;
  write_json(config.out_dir / "manifest.json", manifest);
  return summary;
}

}  // namespace otmcp::bench
