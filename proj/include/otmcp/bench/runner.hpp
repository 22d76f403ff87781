#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "otmcp/bench/plan.hpp"

namespace otmcp::bench {

/// Raised when mocks or sessions cannot be brought up; nothing is written.
class SetupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchConfig {
  std::string binary;  // otmcp executable used for mocks and adapters
  std::filesystem::path out_dir = "bench-out";
  std::vector<Suite> suites{std::begin(kSuiteOrder), std::end(kSuiteOrder)};
  std::vector<std::string> tasks;  // empty: every task of the selected suites
  int repetitions = 0;             // 0: the plan's count
  std::string host = "127.0.0.1";
  std::uint16_t modbus_port = 1502;
  std::uint16_t modbus_ro_port = 1503;
  std::uint16_t mqtt_port = 1883;
  std::uint16_t ua_port = 4840;
  std::optional<double> mqtt_reconnect_initial_s;
  bool fault_skip_uint16_check = false;
  Timing timing;
  std::string seed_note;
};

json to_json(const BenchConfig& c);

struct BenchSummary {
  std::map<std::string, std::size_t> runs;  // per suite
  std::size_t total_runs = 0;
  std::size_t passed = 0;
  std::size_t unexpected = 0;  // runs whose verdict differs from expected_pass()
};

/// Starts the mocks and the four adapter sessions, executes the selected
/// suites in order and writes <suite>.json, manifest.json and the read-only
/// frame log into out_dir. Throws SetupError before writing anything.
BenchSummary run_benchmark(const BenchConfig& config);

/// Modbus function codes that modify device state.
bool is_write_function(int fc) noexcept;

}  // namespace otmcp::bench
