#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "otmcp/bench/plan.hpp"

namespace otmcp::bench {

struct Artifacts {
  json manifest;                // null when absent
  std::map<Suite, json> suites;  // only suites whose artifact exists
};

/// Throws std::runtime_error when an existing artifact is not valid JSON.
Artifacts load_artifacts(const std::filesystem::path& dir);

/// File name -> content for report.md and the CSV tables. Depends only on
/// the run records, so equal artifacts give byte-identical output.
std::map<std::string, std::string> render_report(const Artifacts& a);
void write_report(const Artifacts& a, const std::filesystem::path& out_dir);

struct Check {
  std::string id;  // criterion number as text, or "replay"
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Acceptance checks that can be decided from artifacts alone.
std::vector<Check> verify(const Artifacts& a);

/// Latency of a run as reported: the failing call's latency for fault
/// tasks, the task latency otherwise.
double reported_latency(const json& record);

}  // namespace otmcp::bench
