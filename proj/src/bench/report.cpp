#include "otmcp/bench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "otmcp/bench/oracle.hpp"
#include "otmcp/bench/runner.hpp"
#include "otmcp/bench/stats.hpp"

namespace otmcp::bench {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string pct(std::size_t num, std::size_t den) { return den == 0 ? "n/a" : fmt(100.0 * num / den, 1); }

/// Records grouped by task id in first-appearance order.
std::vector<std::pair<std::string, std::vector<const json*>>> by_task(const json& records) {
  std::vector<std::pair<std::string, std::vector<const json*>>> out;
  for (const auto& r : records) {
    const auto id = r.at("task_id").get<std::string>();
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == id; });
    if (it == out.end()) {
      out.push_back({id, {}});
      it = std::prev(out.end());
    }
    it->second.push_back(&r);
  }
  return out;
}

std::size_t passes(const std::vector<const json*>& rs) {
  return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [](const json* r) { return r->value("pass", false); }));
}

std::optional<double> median_latency(const Artifacts& a, const std::string& task) {
  auto it = a.suites.find(Suite::normal);
  if (it == a.suites.end()) return std::nullopt;
  std::vector<double> xs;
  for (const auto& r : it->second) {
    if (r.at("task_id") == task) xs.push_back(reported_latency(r));
  }
  if (xs.empty()) return std::nullopt;
  return aggregate(xs).median;
}

const json* failing_call(const json& record) {
  for (const auto& c : record.at("calls")) {
    if (c.value("expect", std::string(kExpectSuccess)) != kExpectSuccess) return &c;
  }
  return nullptr;
}

std::string observed_class(const json& call) {
  const auto& env = call.at("envelope");
  if (env.value("success", false)) return "success";
  return env.at("error").value("class", "?");
}

std::string modal_class(const std::vector<const json*>& rs) {
  std::map<std::string, std::size_t> counts;
  for (const auto* r : rs) {
    if (const auto* c = failing_call(*r)) ++counts[observed_class(*c)];
  }
  std::string best = "n/a";
  std::size_t n = 0;
  for (const auto& [cls, k] : counts) {
    if (k > n) best = cls, n = k;
  }
  return best;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string markdown() const {
    std::ostringstream o;
    auto line = [&](const std::vector<std::string>& cells) {
      o << '|';
      for (const auto& c : cells) o << ' ' << c << " |";
      o << '\n';
    };
    line(header_);
    o << '|';
    for (std::size_t i = 0; i < header_.size(); ++i) o << (i == 0 ? " --- |" : " ---: |");
    o << '\n';
    for (const auto& r : rows_) line(r);
    return o.str();
  }

  std::string csv() const {
    std::ostringstream o;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) o << (i ? "," : "") << cells[i];
      o << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return o.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace

double reported_latency(const json& record) {
  if (record.value("suite", "") == "fault") {
    if (const auto* c = failing_call(record)) return c->at("harness_latency_ms").get<double>();
  }
  return record.at("latency_ms").get<double>();
}

Artifacts load_artifacts(const fs::path& dir) {
  Artifacts a;
  auto read = [](const fs::path& p) -> json {
    std::ifstream in(p);
    if (!in) return nullptr;
    try {
      return json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("invalid artifact " + p.string() + ": " + e.what());
    }
  };
  a.manifest = read(dir / "manifest.json");
  for (auto s : kSuiteOrder) {
    auto j = read(dir / (std::string(to_string(s)) + ".json"));
    if (j.is_array()) a.suites[s] = std::move(j);
  }
  return a;
}

std::map<std::string, std::string> render_report(const Artifacts& a) {
  std::map<std::string, std::string> files;
  std::ostringstream md;
  md << "# Benchmark report\n\n";

  // (a) family-level results of the normal suite
  md << "## Normal suite by family\n\n";
  Table family({"family", "tasks", "runs", "task_success_pct", "tool_success_pct", "median_ms", "p95_ms"});
  if (auto it = a.suites.find(Suite::normal); it != a.suites.end()) {
    for (const char* f : {"modbus", "mqtt", "ua", "cross"}) {
      std::set<std::string> tasks;
      std::size_t runs = 0, ok_runs = 0, calls = 0, ok_calls = 0;
      std::vector<double> lat;
      for (const auto& r : it->second) {
        if (r.at("family") != f) continue;
        tasks.insert(r.at("task_id").get<std::string>());
        ++runs;
        ok_runs += r.value("pass", false) ? 1 : 0;
        for (const auto& c : r.at("calls")) {
          ++calls;
          ok_calls += outcome_matches(c) ? 1 : 0;
        }
        lat.push_back(reported_latency(r));
      }
      if (runs == 0) continue;
      const auto s = aggregate(lat);
      family.add({f, std::to_string(tasks.size()), std::to_string(runs), pct(ok_runs, runs), pct(ok_calls, calls),
                  fmt(s.median, 3), fmt(s.p95, 3)});
    }
    md << family.markdown() << '\n';
  } else {
    md << "_absent: no normal suite artifact_\n\n";
  }
  files["family.csv"] = family.csv();

  // (b) per-task latency
  md << "## Per-task latency (ms)\n\n";
  Table tasks({"suite", "task", "family", "n", "pass_pct", "mean", "std", "ci95_lo", "ci95_hi", "median", "p95"});
  for (auto suite : kSuiteOrder) {
    auto it = a.suites.find(suite);
    if (it == a.suites.end()) continue;
    for (const auto& [id, rs] : by_task(it->second)) {
      std::vector<double> lat;
      for (const auto* r : rs) lat.push_back(reported_latency(*r));
      const auto s = aggregate(lat);
      tasks.add({std::string(to_string(suite)), id, rs.front()->at("family").get<std::string>(), std::to_string(s.n),
                 pct(passes(rs), rs.size()), fmt(s.mean, 3), fmt(s.std, 3), fmt(s.ci95_lo, 3), fmt(s.ci95_hi, 3),
                 fmt(s.median, 3), fmt(s.p95, 3)});
    }
  }
  md << (a.suites.empty() ? std::string("_absent: no suite artifacts_\n") : tasks.markdown()) << '\n';
  files["tasks.csv"] = tasks.csv();

  // (c) fault handling
  md << "## Fault handling\n\n";
  Table faults({"task", "runs", "error_handling_pct", "modal_class", "median_ms"});
  if (auto it = a.suites.find(Suite::fault); it != a.suites.end()) {
    for (const auto& [id, rs] : by_task(it->second)) {
      std::vector<double> lat;
      for (const auto* r : rs) lat.push_back(reported_latency(*r));
      faults.add({id, std::to_string(rs.size()), pct(passes(rs), rs.size()), modal_class(rs),
                  fmt(aggregate(lat).median, 3)});
    }
    md << faults.markdown() << '\n';
  } else {
    md << "_absent: no fault suite artifact_\n\n";
  }
  files["faults.csv"] = faults.csv();

  // (d) recovery
  md << "## Recovery\n\n";
  Table recovery({"family", "trials", "same_session_pct", "fresh_session_pct", "detect_median_ms"});
  if (auto it = a.suites.find(Suite::recovery); it != a.suites.end()) {
    for (const auto& [id, rs] : by_task(it->second)) {
      std::size_t same = 0, fresh = 0;
      std::vector<double> detect;
      for (const auto* r : rs) {
        const auto& rec = r->at("recovery");
        same += rec.value("same_session_recovered", false) ? 1 : 0;
        fresh += rec.value("fresh_session_recovered", false) ? 1 : 0;
        detect.push_back(rec.at("detect_latency_ms").get<double>());
      }
      recovery.add({rs.front()->at("family").get<std::string>(), std::to_string(rs.size()), pct(same, rs.size()),
                    pct(fresh, rs.size()), fmt(aggregate(detect).median, 3)});
    }
    md << recovery.markdown() << '\n';
  } else {
    md << "_absent: no recovery suite artifact_\n\n";
  }
  files["recovery.csv"] = recovery.csv();

  files["report.md"] = md.str();
  return files;
}

void write_report(const Artifacts& a, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& [name, content] : render_report(a)) {
    std::ofstream out(out_dir / name, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + (out_dir / name).string());
  }
}

std::vector<Check> verify(const Artifacts& a) {
  std::vector<Check> checks;
  auto suite_records = [&](Suite s) -> const json* {
    auto it = a.suites.find(s);
    return it == a.suites.end() ? nullptr : &it->second;
  };
  auto absent = [&](std::string id, std::string name, Suite s) {
    checks.push_back({std::move(id), std::move(name), false, std::string(to_string(s)) + " artifact absent"});
  };

  if (const auto* normal = suite_records(Suite::normal)) {
    std::size_t runs = normal->size(), ok = 0, calls = 0, ok_calls = 0;
    for (const auto& r : *normal) {
      ok += r.value("pass", false) ? 1 : 0;
      for (const auto& c : r.at("calls")) {
        ++calls;
        ok_calls += outcome_matches(c) ? 1 : 0;
      }
    }
    checks.push_back({"2", "normal suite", runs == 480 && ok == runs && ok_calls == calls,
                      std::to_string(ok) + "/" + std::to_string(runs) + " runs, " + std::to_string(ok_calls) + "/" +
                          std::to_string(calls) + " calls as expected"});
  } else {
    absent("2", "normal suite", Suite::normal);
  }

  if (const auto* fault = suite_records(Suite::fault)) {
    const std::map<std::string, std::string> expected{{"FM1", "protocol_error"}, {"FM2", "range_overflow"},
                                                      {"FQ1", "invalid_input"},  {"FQ2", "invalid_input"},
                                                      {"FO1", "illegal_address"}, {"FO2", "protocol_error"},
                                                      {"FX1", "illegal_address"}};
    std::size_t ok = 0;
    std::string mismatch;
    for (const auto& [id, rs] : by_task(*fault)) {
      ok += passes(rs);
      auto e = expected.find(id);
      if (e != expected.end() && modal_class(rs) != e->second) mismatch += " " + id + "=" + modal_class(rs);
    }
    checks.push_back({"3", "fault suite", fault->size() == 210 && ok == fault->size() && mismatch.empty(),
                      std::to_string(ok) + "/" + std::to_string(fault->size()) + " structured" +
                          (mismatch.empty() ? "" : ", class mismatch:" + mismatch)});
  } else {
    absent("3", "fault suite", Suite::fault);
  }

  if (const auto* stress = suite_records(Suite::stress)) {
    double initial = 1.0;
    if (a.manifest.is_object()) initial = a.manifest["config"].value("mqtt_reconnect_initial_s", 1.0);
    const bool s11_expected_pass = expected_pass("S11", initial);
    bool ok = stress->size() == 120;
    std::string detail;
    for (const auto& [id, rs] : by_task(*stress)) {
      const auto p = passes(rs);
      const bool want_all = expected_pass(id, initial);
      const bool good = want_all ? p == rs.size() : p == 0;
      ok = ok && good;
      detail += id + " " + pct(p, rs.size()) + "% ";
    }
    checks.push_back({"5", "stress suite", ok, detail + "(S11 expected " + (s11_expected_pass ? "100" : "0") + "%)"});
  } else {
    absent("5", "stress suite", Suite::stress);
  }

  if (const auto* rec = suite_records(Suite::recovery)) {
    bool ok = rec->size() == 60;
    std::string detail;
    for (const auto& [id, rs] : by_task(*rec)) {
      std::size_t same = 0, fresh = 0;
      for (const auto* r : rs) {
        same += r->at("recovery").value("same_session_recovered", false) ? 1 : 0;
        fresh += r->at("recovery").value("fresh_session_recovered", false) ? 1 : 0;
      }
      ok = ok && same == rs.size() && fresh == rs.size();
      detail += rs.front()->at("family").get<std::string>() + " same " + pct(same, rs.size()) + "% fresh " +
                pct(fresh, rs.size()) + "%; ";
    }
    checks.push_back({"6", "recovery suite", ok, detail});
  } else {
    absent("6", "recovery suite", Suite::recovery);
  }

  {
    const bool have = a.manifest.is_object();
    const auto total = have ? a.manifest.value("total_runs", 0) : 0;
    bool per_suite = have;
    if (have) {
      const std::map<std::string, int> want{{"normal", 480}, {"fault", 210}, {"stress", 120}, {"recovery", 60}};
      for (const auto& [s, n] : want) per_suite = per_suite && a.manifest["runs"].value(s, 0) == n;
    }
    checks.push_back({"7", "total runs", have && total == 870 && per_suite,
                      have ? std::to_string(total) + " runs in manifest" : "manifest absent"});
  }

  {
    const auto o1 = median_latency(a, "O1"), o4 = median_latency(a, "O4");
    const auto x1 = median_latency(a, "X1"), x1p = median_latency(a, "X1p");
    const auto x2 = median_latency(a, "X2"), x2p = median_latency(a, "X2p");
    if (o1 && o4 && x1 && x1p && x2 && x2p) {
      const bool ok = *o4 >= 10.0 * *o1 && *x1p < *x1 && *x2p < *x2;
      checks.push_back({"8", "latency structure", ok,
                        "O4/O1 " + fmt(*o4 / *o1, 2) + "x, X1p " + fmt(*x1p, 3) + " vs X1 " + fmt(*x1, 3) + " ms, X2p " +
                            fmt(*x2p, 3) + " vs X2 " + fmt(*x2, 3) + " ms"});
    } else {
      checks.push_back({"8", "latency structure", false, "O1/O4/X1/X1p/X2/X2p medians unavailable"});
    }
  }

  {
    const json guard = a.manifest.is_object() ? a.manifest.value("guard_audit", json()) : json();
    if (guard.is_object()) {
      const bool ok = guard.value("write_frames", 1) == 0 && guard.value("all_denied", false) &&
                      guard.value("frames_total", 0) > 0;
      checks.push_back({"10", "guard integrity", ok,
                        std::to_string(guard.value("write_frames", 0)) + " write frames of " +
                            std::to_string(guard.value("frames_total", 0)) + " in the read-only frame log"});
    } else {
      checks.push_back({"10", "guard integrity", false, "guard audit absent"});
    }
  }

  {
    std::size_t total = 0, same = 0;
    for (const auto& [s, records] : a.suites) {
      for (const auto& r : records) {
        ++total;
        same += evaluate_oracle(r).pass == r.value("pass", false) ? 1 : 0;
      }
    }
    checks.push_back({"replay", "oracle replay", total > 0 && same == total,
                      std::to_string(same) + "/" + std::to_string(total) + " pass bits reproduced"});
  }
  return checks;
}

}  // namespace otmcp::bench
