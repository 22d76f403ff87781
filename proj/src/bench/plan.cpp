#include "otmcp/bench/plan.hpp"

namespace otmcp::bench {

namespace {

json rep_plus(double base) { return json{{"$rep", base}}; }

Step call(std::string session, std::string tool, json args = json::object(), std::string expect = kExpectSuccess) {
  Step s;
  s.session = std::move(session);
  s.tool = std::move(tool);
  s.args = std::move(args);
  s.expect = std::move(expect);
  return s;
}

Step parallel(Step s) {
  s.parallel = true;
  return s;
}

Step mock_action(StepKind kind, Family f, int ms = 0) {
  Step s;
  s.kind = kind;
  s.target = f;
  s.wait_ms = ms;
  return s;
}

Step wait(int ms) {
  Step s;
  s.kind = StepKind::wait;
  s.wait_ms = ms;
  return s;
}

json read_args(Family f) {
  switch (f) {
    case Family::modbus:
      return {{"address", 0}, {"count", 4}};
    case Family::ua:
      return {{"node_id", "ns=2;s=temperature"}};
    default:
      return json::object();
  }
}

std::string read_tool(Family f) {
  switch (f) {
    case Family::modbus:
      return "read_input_registers";
    case Family::mqtt:
      return "broker_info";
    default:
      return "read_node";
  }
}

Step read_step(Family f) { return call(session_of(f), read_tool(f), read_args(f)); }

Step write_step(Family f) {
  switch (f) {
    case Family::modbus:
      return call(session::modbus_rw, "write_register", {{"address", 12}, {"value", rep_plus(100)}});
    case Family::mqtt:
      return call(session::mqtt, "publish", {{"topic", "factory/line1/stress"}, {"payload", "tick"}, {"qos", 1}});
    default:
      return call(session::ua, "write_node", {{"node_id", "ns=2;s=fan_speed"}, {"value", rep_plus(10.0)}});
  }
}

json x1_modbus() { return {{"address", 0}, {"count", 4}}; }
json x1_ua() { return {{"node_ids", {"ns=2;s=temperature", "ns=2;s=pressure", "ns=2;s=flow_rate"}}}; }

std::vector<Step> x1(bool par) {
  std::vector<Step> s{call(session::modbus_rw, "read_input_registers", x1_modbus()),
                      call(session::ua, "read_nodes", x1_ua()), call(session::mqtt, "broker_info")};
  if (par) {
    for (auto& step : s) step.parallel = true;
  }
  return s;
}

std::vector<Step> x2(bool par) {
  std::vector<Step> s{
      call(session::modbus_rw, "write_register", {{"address", 11}, {"value", 1234}}),
      call(session::ua, "write_node", {{"node_id", "ns=2;s=pump_running"}, {"value", true}, {"datatype", "Boolean"}}),
      call(session::mqtt, "publish", {{"topic", "factory/line1/control"}, {"payload", "START"}, {"qos", 0}})};
  if (par) {
    for (auto& step : s) step.parallel = true;
  }
  return s;
}

TaskSpec task(std::string id, Suite suite, Family family, std::string title, std::vector<Step> steps) {
  return TaskSpec{std::move(id), suite, family, repetitions(suite), std::move(title), std::move(steps)};
}

}  // namespace

std::string_view to_string(Suite s) noexcept {
  switch (s) {
    case Suite::normal:
      return "normal";
    case Suite::fault:
      return "fault";
    case Suite::stress:
      return "stress";
    case Suite::recovery:
      return "recovery";
  }
  return "normal";
}

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::modbus:
      return "modbus";
    case Family::mqtt:
      return "mqtt";
    case Family::ua:
      return "ua";
    case Family::cross:
      return "cross";
  }
  return "cross";
}

std::optional<Suite> parse_suite(std::string_view text) noexcept {
  for (auto s : kSuiteOrder) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<Family> parse_family(std::string_view text) noexcept {
  for (auto f : {Family::modbus, Family::mqtt, Family::ua, Family::cross}) {
    if (to_string(f) == text) return f;
  }
  return std::nullopt;
}

int repetitions(Suite s) noexcept {
  switch (s) {
    case Suite::normal:
    case Suite::fault:
      return 30;
    case Suite::stress:
      return 10;
    case Suite::recovery:
      return 20;
  }
  return 0;
}

std::string probe_tool(Family f) {
  switch (f) {
    case Family::modbus:
      return "ping";
    case Family::mqtt:
      return "broker_info";
    default:
      return "server_status";
  }
}

std::string session_of(Family f) {
  switch (f) {
    case Family::modbus:
      return session::modbus_rw;
    case Family::mqtt:
      return session::mqtt;
    default:
      return session::ua;
  }
}

std::vector<TaskSpec> load_plan() {
  using enum Suite;
  const Timing timing;
  std::vector<TaskSpec> plan;

  plan.push_back(task("M1", normal, Family::modbus, "Ping the device", {call(session::modbus_rw, "ping")}));
  plan.push_back(task("M2", normal, Family::modbus, "Read a four-register sensor block",
                      {call(session::modbus_rw, "read_input_registers", {{"address", 0}, {"count", 4}})}));
  plan.push_back(task("M3", normal, Family::modbus, "Write a holding register and read it back",
                      {call(session::modbus_rw, "write_register", {{"address", 10}, {"value", rep_plus(40)}}),
                       call(session::modbus_rw, "read_holding_registers", {{"address", 10}, {"count", 1}})}));
  plan.push_back(task("M4", normal, Family::modbus, "Write through the read-only session is denied",
                      {call(session::modbus_ro, "write_register", {{"address", 10}, {"value", rep_plus(40)}},
                            "writes_disabled")}));

  plan.push_back(task("Q1", normal, Family::mqtt, "Inspect broker connectivity", {call(session::mqtt, "broker_info")}));
  plan.push_back(task("Q2", normal, Family::mqtt, "Subscribe to sensors/#",
                      {call(session::mqtt, "subscribe", {{"topic_filter", "sensors/#"}, {"qos", 1}})}));
  plan.push_back(task("Q3", normal, Family::mqtt, "Publish a control payload",
                      {call(session::mqtt, "publish",
                            {{"topic", "factory/line1/cmd"}, {"payload", "START"}, {"qos", 0}, {"retain", false}})}));
  plan.push_back(task("Q4", normal, Family::mqtt, "Publish Sparkplug B DDATA",
                      {call(session::mqtt, "sp_publish_ddata",
                            {{"device_id", "bench-device"},
                             {"metrics", {{{"name", "temperature"}, {"datatype", "Double"}, {"value", rep_plus(20.0)}}}}})}));

  plan.push_back(task("O1", normal, Family::ua, "Read the temperature variable",
                      {call(session::ua, "read_node", {{"node_id", "ns=2;s=temperature"}})}));
  plan.push_back(task("O2", normal, Family::ua, "Browse the actuator subtree",
                      {call(session::ua, "browse", {{"node_id", "ns=2;s=Actuators"}})}));
  plan.push_back(task("O3", normal, Family::ua, "Write the valve position and read it back",
                      {call(session::ua, "write_node", {{"node_id", "ns=2;s=valve_position"}, {"value", rep_plus(25.0)}}),
                       call(session::ua, "read_node", {{"node_id", "ns=2;s=valve_position"}})}));
  plan.push_back(task("O4", normal, Family::ua, "Enumerate the plant variables", {call(session::ua, "list_variables")}));

  plan.push_back(task("X1", normal, Family::cross, "Sequential state snapshot", x1(false)));
  plan.push_back(task("X2", normal, Family::cross, "Sequential control sequence", x2(false)));
  plan.push_back(task("X1p", normal, Family::cross, "Parallel state snapshot", x1(true)));
  plan.push_back(task("X2p", normal, Family::cross, "Parallel control sequence", x2(true)));

  plan.push_back(task("FM1", fault, Family::modbus, "Read an invalid register address",
                      {call(session::modbus_rw, "read_holding_registers", {{"address", 9999}, {"count", 1}},
                            "protocol_error")}));
  plan.push_back(task("FM2", fault, Family::modbus, "Write a value outside the uint16 range",
                      {call(session::modbus_rw, "write_register", {{"address", 10}, {"value", 70000}},
                            "range_overflow")}));
  plan.push_back(task("FQ1", fault, Family::mqtt, "Publish to an empty topic",
                      {call(session::mqtt, "publish", {{"topic", ""}, {"payload", "x"}, {"qos", 0}}, "invalid_input")}));
  plan.push_back(task("FQ2", fault, Family::mqtt, "Subscribe with an invalid QoS",
                      {call(session::mqtt, "subscribe", {{"topic_filter", "ctl/valve"}, {"qos", 5}}, "invalid_input")}));
  plan.push_back(task("FO1", fault, Family::ua, "Read a node that does not exist",
                      {call(session::ua, "read_node", {{"node_id", "ns=2;i=99999"}}, "illegal_address")}));
  plan.push_back(task("FO2", fault, Family::ua, "Write a string to a Float node",
                      {call(session::ua, "write_node", {{"node_id", "ns=2;s=valve_position"}, {"value", "hello"}},
                            "protocol_error")}));
  plan.push_back(task("FX1", fault, Family::cross, "Three-step sequence with one bad input",
                      {call(session::modbus_rw, "read_input_registers", {{"address", 0}, {"count", 4}}),
                       call(session::ua, "read_node", {{"node_id", "ns=2;i=99999"}}, "illegal_address"),
                       call(session::mqtt, "broker_info")}));

  const Family families[] = {Family::modbus, Family::mqtt, Family::ua};
  const char* names[] = {"Modbus", "MQTT", "UA"};
  for (int i = 0; i < 3; ++i) {
    std::vector<Step> steps;
    for (int k = 0; k < 4; ++k) steps.push_back(parallel(read_step(families[i])));
    plan.push_back(task("S" + std::to_string(1 + i), stress, families[i],
                        std::string(names[i]) + ": four concurrent reads", std::move(steps)));
  }
  for (int i = 0; i < 3; ++i) {
    plan.push_back(task("S" + std::to_string(4 + i), stress, families[i],
                        std::string(names[i]) + ": concurrent read and write",
                        {parallel(read_step(families[i])), parallel(write_step(families[i]))}));
  }
  for (int i = 0; i < 3; ++i) {
    std::vector<Step> steps;
    for (int k = 0; k < 50; ++k) steps.push_back(read_step(families[i]));
    plan.push_back(task("S" + std::to_string(7 + i), stress, families[i],
                        std::string(names[i]) + ": fifty sequential reads", std::move(steps)));
  }
  for (int i = 0; i < 3; ++i) {
    const auto f = families[i];
    auto failing = read_step(f);
    failing.expect = kExpectUnavailable;
    plan.push_back(task("S" + std::to_string(10 + i), stress, f, std::string(names[i]) + ": mid-operation restart",
                        {read_step(f), mock_action(StepKind::stop_mock, f), failing,
                         mock_action(StepKind::start_mock, f, timing.stress_downtime_ms), wait(timing.stress_window_ms),
                         read_step(f)}));
  }

  for (int i = 0; i < 3; ++i) {
    const auto f = families[i];
    auto failing = call(session_of(f), probe_tool(f), json::object(), kExpectUnavailable);
    plan.push_back(task("R" + std::to_string(1 + i), recovery, f, std::string(names[i]) + ": transient outage",
                        {call(session_of(f), probe_tool(f)), mock_action(StepKind::stop_mock, f), failing,
                         mock_action(StepKind::start_mock, f, timing.recovery_downtime_ms),
                         call(session_of(f), probe_tool(f))}));
  }
  return plan;
}

std::size_t total_runs(const std::vector<TaskSpec>& plan) {
  std::size_t n = 0;
  for (const auto& t : plan) n += static_cast<std::size_t>(t.repetitions);
  return n;
}

json instantiate(const json& tmpl, int repetition) {
  if (tmpl.is_object()) {
    if (tmpl.size() == 1 && tmpl.contains("$rep")) {
      const auto& base = tmpl["$rep"];
      if (base.is_number_integer()) return base.get<std::int64_t>() + repetition;
      return base.get<double>() + repetition;
    }
    json out = json::object();
    for (const auto& [k, v] : tmpl.items()) out[k] = instantiate(v, repetition);
    return out;
  }
  if (tmpl.is_array()) {
    json out = json::array();
    for (const auto& v : tmpl) out.push_back(instantiate(v, repetition));
    return out;
  }
  return tmpl;
}

json to_json(const Step& s) {
  switch (s.kind) {
    case StepKind::call:
      return {{"kind", "call"},       {"session", s.session},   {"tool", s.tool},
              {"args", s.args},       {"expect", s.expect},     {"parallel", s.parallel}};
    case StepKind::stop_mock:
      return {{"kind", "stop_mock"}, {"target", to_string(s.target)}};
    case StepKind::start_mock:
      return {{"kind", "start_mock"}, {"target", to_string(s.target)}, {"downtime_ms", s.wait_ms}};
    case StepKind::wait:
      return {{"kind", "wait"}, {"ms", s.wait_ms}};
  }
  return nullptr;
}

json to_json(const TaskSpec& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  return {{"id", t.id},
          {"suite", to_string(t.suite)},
          {"family", to_string(t.family)},
          {"repetitions", t.repetitions},
          {"title", t.title},
          {"steps", steps}};
}

}  // namespace otmcp::bench
