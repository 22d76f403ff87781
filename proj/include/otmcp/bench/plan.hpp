#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace otmcp::bench {

using json = nlohmann::json;

enum class Suite { normal, fault, stress, recovery };
enum class Family { modbus, mqtt, ua, cross };

std::string_view to_string(Suite s) noexcept;
std::string_view to_string(Family f) noexcept;
std::optional<Suite> parse_suite(std::string_view text) noexcept;
std::optional<Family> parse_family(std::string_view text) noexcept;
inline constexpr Suite kSuiteOrder[] = {Suite::normal, Suite::fault, Suite::stress, Suite::recovery};

/// Repetitions per suite.
int repetitions(Suite s) noexcept;

/// Session names the harness opens.
namespace session {
inline constexpr const char* modbus_rw = "modbus_rw";
inline constexpr const char* modbus_ro = "modbus_ro";
inline constexpr const char* mqtt = "mqtt";
inline constexpr const char* ua = "ua";
}  // namespace session

enum class StepKind { call, stop_mock, start_mock, wait };

/// Expected outcome of a call step: "success", an error class name, or
/// "unavailable" (endpoint_unreachable or timeout).
inline constexpr const char* kExpectSuccess = "success";
inline constexpr const char* kExpectUnavailable = "unavailable";

struct Step {
  StepKind kind = StepKind::call;
  std::string session;
  std::string tool;
  /// Argument template: any object {"$rep": base} becomes base + repetition.
  json args = json::object();
  std::string expect = kExpectSuccess;
  /// Consecutive parallel calls are issued concurrently.
  bool parallel = false;
  Family target = Family::modbus;  // stop_mock / start_mock
  int wait_ms = 0;                 // wait; start_mock: downtime held before relaunch
};

struct TaskSpec {
  std::string id;
  Suite suite = Suite::normal;
  Family family = Family::modbus;
  int repetitions = 0;
  std::string title;
  std::vector<Step> steps;
};

/// The fixed task matrix: 16 normal, 7 fault, 12 stress and 3 recovery
/// tasks. Repetitions are numbered from 1.
std::vector<TaskSpec> load_plan();
std::size_t total_runs(const std::vector<TaskSpec>& plan);

json instantiate(const json& tmpl, int repetition);

json to_json(const Step& s);
json to_json(const TaskSpec& t);

/// Probe tool per family used by the restart and recovery tasks.
std::string probe_tool(Family f);
std::string session_of(Family f);

/// Timing knobs for restart tasks, kept in the plan so artifacts carry them.
struct Timing {
  int stress_downtime_ms = 1100;
  int stress_window_ms = 1000;
  int recovery_downtime_ms = 500;
  int recovery_window_ms = 3000;
  int recovery_poll_ms = 250;
};

}  // namespace otmcp::bench
