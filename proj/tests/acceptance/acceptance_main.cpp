// Runs every acceptance criterion end to end and prints one line per criterion.
// Usage: otmcp_acceptance [--allow-fail N]... [--work DIR] [--results FILE]

#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "otmcp/bench/report.hpp"
#include "otmcp/mcp_client.hpp"
#include "otmcp/modbus/mock.hpp"
#include "otmcp/mqtt/mock.hpp"
#include "otmcp/ua/mock.hpp"

using namespace otmcp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Line {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

int run(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(OTMCP_BINARY) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return -1;
  std::string text;
  char buf[1024];
  while (std::fgets(buf, sizeof(buf), p)) text += buf;
  const int status = ::pclose(p);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

std::uint16_t free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

std::string ports_flags() {
  std::set<std::uint16_t> used;
  auto next = [&] {
    for (;;) {
      const auto p = free_port();
      if (used.insert(p).second) return p;
    }
  };
  std::ostringstream s;
  s << " --modbus-port " << next() << " --modbus-ro-port " << next() << " --mqtt-port " << next() << " --ua-port "
    << next();
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json load_json(const fs::path& p) { return json::parse(read_file(p)); }

Line tool_discovery() {
  modbus::MockOptions mo;
  mo.bind.port = 0;
  mo.simulate = false;
  modbus::ModbusMock modbus_mock(mo);
  mqtt::MqttMockOptions qo;
  qo.bind.port = 0;
  qo.simulate = false;
  mqtt::MqttMock mqtt_mock(qo);
  ua::MockOptions uo;
  uo.bind.port = 0;
  uo.simulate = false;
  ua::UaMock ua_mock(uo);
  modbus_mock.start();
  mqtt_mock.start();
  ua_mock.start();

  struct Target {
    std::string family;
    std::map<std::string, std::string> env;
    std::size_t want;
  };
  const std::vector<Target> targets{
      {"modbus", {{"MODBUS_HOST", "127.0.0.1"}, {"MODBUS_PORT", std::to_string(modbus_mock.port())}}, 20},
      {"mqtt", {{"MQTT_HOST", "127.0.0.1"}, {"MQTT_PORT", std::to_string(mqtt_mock.port())}}, 15},
      {"ua", {{"UA_HOST", "127.0.0.1"}, {"UA_PORT", std::to_string(ua_mock.port())}}, 7}};
  Line line{1, "tool discovery", true, ""};
  for (const auto& t : targets) {
    mcp::LaunchSpec spec;
    spec.argv = {OTMCP_BINARY, "adapter", t.family};
    spec.env = t.env;
    spec.stderr_path = "/dev/null";
    const auto start = Clock::now();
    std::size_t count = 0;
    try {
      auto session = mcp::Session::open(spec);
      count = session->list_tools().size();
    } catch (const std::exception& e) {
      line.detail += t.family + " error (" + e.what() + ") ";
    }
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    const bool ok = count == t.want && ms < 1000.0;
    line.pass = line.pass && ok;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s %zu/%zu in %.1f ms; ", t.family.c_str(), count, t.want, ms);
    line.detail += buf;
  }
  mqtt_mock.stop();
  modbus_mock.stop();
  ua_mock.stop();
  return line;
}

Line property_suites() {
  const std::string filter =
      "ModbusCodecProperty.AduRoundTripOverRandomValidFrames:MqttCodec.RandomPacketsRoundTrip:"
      "SparkplugPayload.RandomPayloadsRoundTrip:SparkplugVarint.AgreesWithOracle:"
      "MqttTopics.ExhaustiveSmallDomainMatchesOracle:ModbusCodec.MaskWriteMatchesBitwiseBruteForceOnGrid:"
      "BrokerTest.RoutingAgreesWithOracleOnRandomPairs:BenchStats.RandomSamplesMatchOracle:"
      "UaNodeId.RenderIsCanonicalAndParseInvertsIt";
  const std::string cmd = std::string(OTMCP_UNIT_TESTS) + " --gtest_brief=1 --gtest_filter=" + filter + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  std::string text;
  char buf[1024];
  while (p && std::fgets(buf, sizeof(buf), p)) text += buf;
  const int status = p ? ::pclose(p) : -1;
  const bool ok = status == 0;
  std::string detail = "codec round-trips, topic and mask-write oracles, statistics oracle";
  const auto pos = text.find("[  PASSED  ]");
  if (pos != std::string::npos) detail += ": " + text.substr(pos + 13, text.find('\n', pos) - pos - 13);
  if (!ok) detail += ": unit test binary reported failures";
  return {9, "property suites", ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> allowed;
  fs::path results;
  fs::path work = fs::temp_directory_path() / ("otmcp-acceptance-" + std::to_string(::getpid()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--allow-fail" && i + 1 < argc) {
      allowed.insert(std::stoi(argv[++i]));
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--results" && i + 1 < argc) {
      results = argv[++i];
    } else {
      std::cerr << "usage: otmcp_acceptance [--allow-fail N]... [--work DIR] [--results FILE]\n";
      return 2;
    }
  }
  fs::remove_all(work);
  fs::create_directories(work);

  std::vector<Line> lines;
  lines.push_back(tool_discovery());

  const auto full = work / "full";
  std::string log;
  const auto t0 = Clock::now();
  const int rc = run("bench run --out " + full.string() + ports_flags(), &log);
  const double full_s = std::chrono::duration<double>(Clock::now() - t0).count();
  std::map<std::string, bench::Check> checks;
  if (fs::exists(full / "manifest.json")) {
    for (auto& c : bench::verify(bench::load_artifacts(full))) checks[c.id] = c;
  } else {
    std::cerr << log;
  }
  auto from_check = [&](int id, const std::string& key, std::string extra = "") {
    const auto it = checks.find(key);
    if (it == checks.end()) return Line{id, "criterion " + key, false, "full benchmark produced no artifacts"};
    return Line{id, it->second.name, it->second.pass, it->second.detail + extra};
  };

  char timing[96];
  std::snprintf(timing, sizeof(timing), "; full run %.0f s, exit %d", full_s, rc);
  lines.push_back(from_check(2, "2", timing));
  lines.push_back(from_check(3, "3"));

  // FM2 must fail once the adapter's uint16 check is bypassed.
  {
    const auto dir = work / "fm2-bypass";
    run("bench run --suite fault --tasks FM2 --repetitions 5 --fault-skip-uint16-check --out " + dir.string() +
        ports_flags());
    Line line{4, "FM2 falsifiability", false, "bypass run produced no artifacts"};
    if (fs::exists(dir / "fault.json")) {
      std::size_t failed = 0;
      const auto runs = load_json(dir / "fault.json");
      for (const auto& r : runs) failed += r["pass"].get<bool>() ? 0 : 1;
      std::size_t base_ok = 0;
      std::size_t base_n = 0;
      if (fs::exists(full / "fault.json")) {
        for (const auto& r : load_json(full / "fault.json")) {
          if (r["task_id"] != "FM2") continue;
          ++base_n;
          base_ok += r["pass"].get<bool>() ? 1 : 0;
        }
      }
      line.pass = base_n > 0 && base_ok == base_n && !runs.empty() && failed == runs.size();
      line.detail = "with the check FM2 passes " + std::to_string(base_ok) + "/" + std::to_string(base_n) +
                    "; with the bypass " + std::to_string(failed) + "/" + std::to_string(runs.size()) + " runs fail";
    }
    lines.push_back(line);
  }

  // S11 must fully recover when the reconnect delay starts at 0.2 s.
  {
    auto line = from_check(5, "5");
    const auto dir = work / "s11-tuned";
    run("bench run --suite stress --tasks S11 --mqtt-reconnect-initial 0.2 --out " + dir.string() + ports_flags());
    std::size_t ok = 0;
    std::size_t n = 0;
    if (fs::exists(dir / "stress.json")) {
      for (const auto& r : load_json(dir / "stress.json")) {
        ++n;
        ok += r["pass"].get<bool>() ? 1 : 0;
      }
    }
    const bool tuned = n == 10 && ok == n;
    line.pass = line.pass && tuned;
    line.detail += "; S11 with 0.2 s initial reconnect delay " + std::to_string(ok) + "/" + std::to_string(n);
    lines.push_back(line);
  }

  lines.push_back(from_check(6, "6"));
  lines.push_back(from_check(7, "7"));
  lines.push_back(from_check(8, "8"));
  lines.push_back(property_suites());
  lines.push_back(from_check(10, "10"));

  {
    Line line{11, "report determinism", false, ""};
    const auto a = work / "report-a";
    const auto b = work / "report-b";
    const int ra = run("bench report --in " + full.string() + " --out " + a.string());
    const int rb = run("bench report --in " + full.string() + " --out " + b.string());
    std::size_t files = 0;
    bool same = ra == 0 && rb == 0 && fs::exists(a);
    if (same) {
      for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        same = same && read_file(e.path()) == read_file(b / e.path().filename());
      }
    }
    line.pass = same && files > 0;
    line.detail = std::to_string(files) + " files compared byte for byte";
    lines.push_back(line);
  }

  bool ok = true;
  std::ostringstream text;
  for (const auto& l : lines) {
    const bool tolerated = !l.pass && allowed.count(l.id);
    text << (l.pass ? "PASS" : "FAIL") << " criterion " << l.id << " (" << l.name << "): " << l.detail
         << (tolerated ? " [failure tolerated on this host]" : "") << '\n';
    ok = ok && (l.pass || tolerated);
  }
  std::cout << text.str();
  if (!results.empty()) std::ofstream(results) << text.str();
  if (ok) fs::remove_all(work);
  return ok ? 0 : 1;
}
