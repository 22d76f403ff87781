#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "otmcp/bench/oracle.hpp"
#include "otmcp/bench/plan.hpp"
#include "otmcp/bench/report.hpp"
#include "otmcp/bench/stats.hpp"
#include "otmcp/envelope.hpp"
#include "otmcp/modbus/mock.hpp"
#include "otmcp/mqtt/codec.hpp"
#include "otmcp/mqtt/mock.hpp"
#include "otmcp/sparkplug/sparkplug.hpp"
#include "otmcp/ua/mock.hpp"
#include "otmcp/ua/model.hpp"

namespace py = pybind11;
using namespace otmcp;

namespace {

std::string canonical_node_id(const std::string& text) { return ua::render(ua::parse_node_id(text)); }

py::bytes encode_sparkplug(const std::string& payload_json) {
  const auto j = json::parse(payload_json);
  sparkplug::Payload p;
  if (j.contains("timestamp")) p.timestamp_ms = j["timestamp"].get<std::uint64_t>();
  if (j.contains("seq")) p.seq = j["seq"].get<std::uint64_t>();
  for (const auto& m : j.value("metrics", json::array())) p.metrics.push_back(sparkplug::metric_from_json(m));
  const auto bytes = sparkplug::encode_payload(p);
  return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string decode_sparkplug(const py::bytes& data) {
  const std::string s = data;
  const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
  return sparkplug::payload_to_json(sparkplug::decode_payload(bytes)).dump();
}

py::dict aggregate(std::vector<double> samples) {
  const auto s = bench::aggregate(std::move(samples));
  py::dict d;
  d["n"] = s.n;
  d["mean"] = s.mean;
  d["std"] = s.std;
  d["ci95_lo"] = s.ci95_lo;
  d["ci95_hi"] = s.ci95_hi;
  d["median"] = s.median;
  d["p95"] = s.p95;
  return d;
}

std::string plan_json() {
  json out = json::array();
  for (const auto& t : bench::load_plan()) out.push_back(bench::to_json(t));
  return out.dump();
}

std::pair<bool, std::string> evaluate_oracle(const std::string& record_json) {
  const auto v = bench::evaluate_oracle(json::parse(record_json));
  return {v.pass, v.reason};
}

std::vector<std::tuple<std::string, std::string, bool, std::string>> verify(const std::filesystem::path& dir) {
  std::vector<std::tuple<std::string, std::string, bool, std::string>> out;
  for (const auto& c : bench::verify(bench::load_artifacts(dir))) out.emplace_back(c.id, c.name, c.pass, c.detail);
  return out;
}

template <typename Mock, typename Options>
void bind_mock(py::module_& m, const char* name, const char* doc) {
  py::class_<Mock>(m, name, doc)
      .def(py::init([](const std::string& host, std::uint16_t port, bool simulate, double tick_hz) {
             Options o;
             o.bind = {host, port};
             o.simulate = simulate;
             o.tick_hz = tick_hz;
             return std::make_unique<Mock>(o);
           }),
           py::arg("host") = "127.0.0.1", py::arg("port") = 0, py::arg("simulate") = true, py::arg("tick_hz") = 1.0)
      .def("start", &Mock::start, py::call_guard<py::gil_scoped_release>())
      .def("stop", &Mock::stop, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("port", &Mock::port);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the otmcp package";

  static py::exception<Failure> error(m, "OtmcpError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Failure& f) {
      PyErr_SetString(error.ptr(), (std::string(to_string(f.error_class())) + ": " + f.what()).c_str());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("canonical_node_id", &canonical_node_id, "Parse a node id and render it canonically");
  m.def("topic_matches", [](const std::string& f, const std::string& t) { return mqtt::topic_matches(f, t); },
        "MQTT topic filter match");
  m.def("encode_sparkplug", &encode_sparkplug, "Encode a Sparkplug B payload given as JSON text");
  m.def("decode_sparkplug", &decode_sparkplug, "Decode Sparkplug B payload bytes to JSON text");
  m.def("validate_envelope", [](const std::string& text) { return validate_envelope(json::parse(text)); },
        "Violations of the response envelope contract; empty when valid");
  m.def("aggregate", &aggregate, "Mean, std, 95% CI, median and nearest-rank p95");
  m.def("t_critical_975", &bench::t_critical_975);
  m.def("plan_json", &plan_json, "The benchmark task matrix as JSON text");
  m.def("evaluate_oracle", &evaluate_oracle, "Pass/fail and reason for one run record given as JSON text");
  m.def("verify", &verify, py::arg("artifact_dir"), "Acceptance checks over a benchmark artifact directory");
  m.def("render_report", [](const std::filesystem::path& dir) { return bench::render_report(bench::load_artifacts(dir)); },
        py::arg("artifact_dir"), "Report file name to content");

  bind_mock<modbus::ModbusMock, modbus::MockOptions>(m, "ModbusMock", "In-process Modbus TCP plant mock");
  bind_mock<mqtt::MqttMock, mqtt::MqttMockOptions>(m, "MqttMock", "In-process MQTT broker with Sparkplug simulator");
  bind_mock<ua::UaMock, ua::MockOptions>(m, "UaMock", "In-process node-model plant mock");
}
