#include "otmcp/bench/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace otmcp::bench {

namespace {

const json& data_of(const json& call) { return call.at("envelope").at("data"); }

bool near(const json& v, double expected) {
  return v.is_number() && std::fabs(v.get<double>() - expected) <= 1e-6 * std::max(1.0, std::fabs(expected));
}

Verdict fail(std::string reason) { return Verdict{false, std::move(reason)}; }

Verdict postcondition(const std::string& id, const json& calls, int rep) {
  auto count = [&](std::size_t n) {
    return calls.size() == n ? Verdict{true, {}} : fail("expected " + std::to_string(n) + " calls");
  };
  if (id == "M2") {
    if (data_of(calls[0]).at("values").size() != 4) return fail("sensor block does not hold four values");
  } else if (id == "M3") {
    if (auto v = count(2); !v.pass) return v;
    const auto& values = data_of(calls[1]).at("values");
    if (values.size() != 1 || values[0] != 40 + rep) return fail("readback differs from the written value");
  } else if (id == "Q1" || id == "X1" || id == "X1p") {
    const auto& mqtt = data_of(calls.back());
    if (!mqtt.value("connected", false)) return fail("broker_info reports a disconnected client");
    if (id != "Q1") {
      if (data_of(calls[0]).at("values").size() != 4) return fail("sensor block does not hold four values");
      if (data_of(calls[1]).value("count", 0) != 3) return fail("multi-node read did not return three values");
    }
  } else if (id == "Q2") {
    const auto& d = data_of(calls[0]);
    if (!d.contains("granted_qos")) return fail("subscription reports no granted QoS");
  } else if (id == "Q4") {
    const auto& d = data_of(calls[0]);
    if (d.value("topic", "").find("/DDATA/") == std::string::npos) return fail("DDATA was not published");
  } else if (id == "O1") {
    const auto& d = data_of(calls[0]);
    if (d.value("datatype", "") != "Float" || !d.at("value").is_number()) return fail("temperature is not a Float");
  } else if (id == "O2") {
    if (data_of(calls[0]).value("count", 0) != 6) return fail("actuator folder does not hold six children");
  } else if (id == "O3") {
    if (auto v = count(2); !v.pass) return v;
    if (!near(data_of(calls[1]).at("value"), 25.0 + rep)) return fail("readback differs from the written value");
  } else if (id == "O4") {
    if (data_of(calls[0]).value("count", 0) < 14) return fail("fewer than 14 variables enumerated");
  }
  return Verdict{true, {}};
}

}  // namespace

bool outcome_matches(const json& call) {
  if (!call.contains("envelope") || !call["envelope"].is_object()) return false;
  const auto& env = call["envelope"];
  if (env.at("meta").value("protocol", "") == "mcp") return false;
  const auto expect = call.value("expect", std::string(kExpectSuccess));
  const bool ok = env.value("success", false);
  if (expect == kExpectSuccess) return ok;
  if (ok || !env["error"].is_object()) return false;
  const auto cls = env["error"].value("class", "");
  if (expect == kExpectUnavailable) return cls == "endpoint_unreachable" || cls == "timeout";
  return cls == expect;
}

Verdict evaluate_oracle(const json& record) {
  try {
    if (record.contains("recovery") && record["recovery"].is_object()) {
      const auto& r = record["recovery"];
      if (!r.value("baseline_ok", false)) return fail("baseline call failed");
      if (!r.value("outage_detected", false)) return fail("outage was not reported as a structured failure");
      if (r.value("same_session_recovered", false) || r.value("fresh_session_recovered", false)) return {true, {}};
      return fail("endpoint was not recovered in either session mode");
    }
    const auto& calls = record.at("calls");
    const auto id = record.at("task_id").get<std::string>();
    const int rep = record.at("repetition").get<int>();
    if (calls.empty()) return fail("no calls recorded");
    for (std::size_t i = 0; i < calls.size(); ++i) {
      if (!outcome_matches(calls[i])) {
        const auto& env = calls[i].value("envelope", json());
        std::string got = "no envelope";
        if (env.is_object()) got = env.value("success", false) ? "success" : env["error"].value("class", "?");
        return fail("call " + std::to_string(i) + " (" + calls[i].value("tool", "") + ") expected " +
                    calls[i].value("expect", "success") + ", got " + got);
      }
    }
    std::vector<const json*> par;
    for (const auto& c : calls) {
      if (c.value("parallel", false)) par.push_back(&c);
    }
    if (par.size() > 1) {
      double last_start = 0.0;
      double first_end = 1e300;
      for (const auto* c : par) {
        last_start = std::max(last_start, c->at("started_ms").get<double>());
        first_end = std::min(first_end, c->at("finished_ms").get<double>());
      }
      if (last_start > first_end) return fail("parallel calls did not overlap in flight");
    }
    return postcondition(id, calls, rep);
  } catch (const json::exception& e) {
    return fail(std::string("malformed record: ") + e.what());
  }
}

bool expected_pass(const std::string& task_id, double mqtt_reconnect_initial_s) {
  return task_id != "S11" || mqtt_reconnect_initial_s < 1.0;
}

}  // namespace otmcp::bench
