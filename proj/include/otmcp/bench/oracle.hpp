#pragma once

#include <string>

#include "otmcp/bench/plan.hpp"

namespace otmcp::bench {

struct Verdict {
  bool pass = false;
  std::string reason;  // empty on pass
};

/// Whether one recorded call matches its expected outcome. Failures
/// produced by the harness itself (hung or dead adapter) never match.
bool outcome_matches(const json& call);

/// Pass/fail for one run record, computed only from its recorded calls:
/// every call must match its expectation, parallel steps must have
/// overlapping in-flight intervals, and the task's postcondition must hold.
/// Recovery records pass when the endpoint was recovered in either mode.
Verdict evaluate_oracle(const json& record);

/// Whether the acceptance criteria expect a task's runs to pass. S11 is
/// expected to fail while the MQTT reconnect delay starts at 1 s or more.
bool expected_pass(const std::string& task_id, double mqtt_reconnect_initial_s);

}  // namespace otmcp::bench
