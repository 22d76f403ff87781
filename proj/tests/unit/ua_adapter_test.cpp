#include <gtest/gtest.h>

#include <cstdlib>
#include <functional>
#include <set>

#include "otmcp/ua/adapter.hpp"
#include "otmcp/ua/mock.hpp"

using namespace otmcp;
using namespace otmcp::ua;

namespace {

class UaAdapterTest : public ::testing::Test {
 protected:
  void SetUp() override { start_mock(0); }

  void start_mock(std::uint16_t port) {
    MockOptions o;
    o.bind = {"127.0.0.1", port};
    o.simulate = false;
    mock_ = std::make_unique<UaMock>(o);
    mock_->start();
    port_ = mock_->port();
  }

  std::unique_ptr<Adapter> make() {
    AdapterConfig cfg;
    cfg.client.endpoint = {"127.0.0.1", port_};
    cfg.client.connect_timeout = std::chrono::milliseconds(300);
    return std::make_unique<Adapter>(std::move(cfg));
  }

  static Envelope call(const Adapter& a, std::string_view tool, const json& args = json::object()) {
    auto env = a.registry().invoke(tool, args);
    EXPECT_TRUE(env.has_value()) << tool;
    EXPECT_TRUE(validate_envelope(env->to_json()).empty()) << env->serialize();
    return *env;
  }

  std::unique_ptr<UaMock> mock_;
  std::uint16_t port_ = 0;
};

}  // namespace

TEST_F(UaAdapterTest, ExposesSevenTools) {
  auto a = make();
  std::set<std::string> names;
  for (const auto& t : a->registry().list()) names.insert(t["name"].get<std::string>());
  EXPECT_EQ(names, (std::set<std::string>{"server_status", "read_node", "write_node", "browse", "read_nodes",
                                          "list_variables", "call_method"}));
}

TEST_F(UaAdapterTest, ServerStatusAndRead) {
  auto a = make();
  const auto s = call(*a, "server_status");
  ASSERT_TRUE(s.ok()) << s.serialize();
  EXPECT_EQ(s.data()["state"], "running");
  EXPECT_EQ(s.data()["endpoint"], "opc.tcp://127.0.0.1:" + std::to_string(port_));
  EXPECT_TRUE(s.data()["uptime_s"].is_number());
  EXPECT_EQ(s.meta().protocol, "ua");
  EXPECT_EQ(s.meta().attempts, 1);

  const auto r = call(*a, "read_node", {{"node_id", "ns=2;s=temperature"}});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.data()["datatype"], "Float");
  EXPECT_DOUBLE_EQ(r.data()["value"].get<double>(), 23.4);
  EXPECT_EQ(r.meta().attempts, 1);

  const auto fo1 = call(*a, "read_node", {{"node_id", "ns=2;i=99999"}});
  EXPECT_EQ(fo1.error_class(), ErrorClass::illegal_address);
  EXPECT_EQ(call(*a, "read_node", {{"node_id", "ns=2,i=5"}}).error_class(), ErrorClass::invalid_input);
  EXPECT_EQ(call(*a, "read_node").error_class(), ErrorClass::invalid_input);
}

TEST_F(UaAdapterTest, ReadNodesKeepsRequestOrder) {
  auto a = make();
  const auto r = call(*a, "read_nodes", {{"node_ids", {"ns=2;s=ph", "ns=2;s=temperature", "ns=2;s=humidity"}}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(r.data()["count"], 3);
  EXPECT_EQ(r.data()["values"][0]["node_id"], "ns=2;s=ph");
  EXPECT_EQ(r.data()["values"][1]["node_id"], "ns=2;s=temperature");
  EXPECT_EQ(r.data()["values"][2]["node_id"], "ns=2;s=humidity");
  EXPECT_EQ(call(*a, "read_nodes", {{"node_ids", json::array()}}).error_class(), ErrorClass::invalid_input);
  EXPECT_EQ(call(*a, "read_nodes", {{"node_ids", {"ns=2;s=ph", "ns=2;i=99999"}}}).error_class(),
            ErrorClass::illegal_address);
}

TEST_F(UaAdapterTest, WriteRules) {
  auto a = make();
  for (int rep = 0; rep < 10; ++rep) {
    const double v = 25.0 + rep;
    ASSERT_TRUE(call(*a, "write_node", {{"node_id", "ns=2;s=valve_position"}, {"value", v}}).ok());
    EXPECT_DOUBLE_EQ(call(*a, "read_node", {{"node_id", "ns=2;s=valve_position"}}).data()["value"].get<double>(), v);
  }
  const auto fo2 = call(*a, "write_node", {{"node_id", "ns=2;s=valve_position"}, {"value", "hello"}});
  EXPECT_EQ(fo2.error_class(), ErrorClass::protocol_error);
  EXPECT_EQ(fo2.error()->details["reason"], "type_mismatch");
  const auto ro = call(*a, "write_node", {{"node_id", "ns=2;s=temperature"}, {"value", 1.0}});
  EXPECT_EQ(ro.error_class(), ErrorClass::protocol_error);
  EXPECT_EQ(ro.error()->details["reason"], "access_denied");
  EXPECT_EQ(call(*a, "write_node", {{"node_id", "ns=2;i=99999"}, {"value", 1.0}}).error_class(),
            ErrorClass::illegal_address);
  EXPECT_EQ(call(*a, "write_node", {{"node_id", "ns=2;s=valve_position"}, {"value", 1.0}, {"datatype", "Real"}})
                .error_class(),
            ErrorClass::invalid_input);
  const auto b = call(*a, "write_node", {{"node_id", "ns=2;s=emergency_stop"}, {"value", true}, {"datatype", "Boolean"}});
  ASSERT_TRUE(b.ok()) << b.serialize();
  EXPECT_TRUE(mock_->space().plant().emergency_stop);
}

TEST_F(UaAdapterTest, Browse) {
  auto a = make();
  const auto root = call(*a, "browse");
  ASSERT_TRUE(root.ok());
  std::vector<std::string> names;
  for (const auto& c : root.data()["children"]) names.push_back(c["browse_name"]);
  EXPECT_EQ(names, (std::vector<std::string>{"Sensors", "Actuators", "Status", "Methods"}));

  const auto act = call(*a, "browse", {{"node_id", "ns=2;s=Actuators"}});
  EXPECT_EQ(act.data()["count"], 6);
  for (const auto& c : act.data()["children"]) EXPECT_EQ(c["node_class"], "Variable");
  EXPECT_EQ(call(*a, "browse", {{"node_id", "ns=2;s=ph"}}).data()["count"], 0);
  EXPECT_EQ(call(*a, "browse", {{"node_id", "ns=2;i=99999"}}).error_class(), ErrorClass::illegal_address);
}

TEST_F(UaAdapterTest, ListVariablesEqualsBrowseReadTraversal) {
  auto a = make();
  // Oracle: depth-first traversal built only from the browse and read_node tools.
  json expected = json::array();
  std::function<void(const std::string&, const std::string&)> walk = [&](const std::string& id,
                                                                        const std::string& path) {
    const auto children = call(*a, "browse", {{"node_id", id}}).data()["children"];
    for (const auto& c : children) {
      const auto child = c["node_id"].get<std::string>();
      const auto child_path = path + "/" + c["browse_name"].get<std::string>();
      if (c["node_class"] == "Variable") {
        const auto r = call(*a, "read_node", {{"node_id", child}});
        expected.push_back({{"node_id", child}, {"path", child_path}, {"value", r.data()["value"]}});
      }
      walk(child, child_path);
    }
  };
  walk("ns=0;i=85", "");

  const auto listed = call(*a, "list_variables");
  ASSERT_TRUE(listed.ok()) << listed.serialize();
  const auto& vars = listed.data()["variables"];
  ASSERT_EQ(vars.size(), expected.size());
  EXPECT_GE(vars.size(), 14u);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    EXPECT_EQ(vars[i]["node_id"], expected[i]["node_id"]);
    EXPECT_EQ(vars[i]["path"], expected[i]["path"]);
    if (vars[i]["node_id"] != "ns=2;s=uptime_s") EXPECT_EQ(vars[i]["value"], expected[i]["value"]);
  }

  const auto sensors = call(*a, "list_variables", {{"root", "ns=2;s=Sensors"}});
  EXPECT_EQ(sensors.data()["count"], 8);
  std::vector<json> first, second;
  for (int pass = 0; pass < 2; ++pass) {
    const auto run = call(*a, "list_variables").data()["variables"];
    for (const auto& v : run) (pass == 0 ? first : second).push_back(v["node_id"]);
  }
  EXPECT_EQ(first, second);
}

TEST_F(UaAdapterTest, CallMethod) {
  auto a = make();
  mock_->space().write(NodeId{2, std::string("conveyor_speed")}, 4.0, std::nullopt);
  for (int i = 0; i < 3; ++i) {
    std::lock_guard lock(mock_->mutex());
    mock_->space().sim_tick(1.0);
  }
  ASSERT_EQ(mock_->space().plant().production_count, 3u);
  const auto r = call(*a, "call_method", {{"method_id", "ns=2;s=reset_counters"}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(r.data()["method_id"], "ns=2;s=reset_counters");
  EXPECT_EQ(mock_->space().plant().production_count, 0u);
  EXPECT_EQ(call(*a, "read_node", {{"node_id", "ns=2;s=simulation_tick"}}).data()["value"], 0);

  EXPECT_TRUE(call(*a, "call_method", {{"method_id", "ns=2;s=set_mode"}, {"args", {"manual"}}}).ok());
  EXPECT_EQ(call(*a, "read_node", {{"node_id", "ns=2;s=device_state"}}).data()["value"], "manual");
  EXPECT_EQ(call(*a, "call_method", {{"method_id", "ns=2;s=explode"}}).error_class(), ErrorClass::illegal_address);
  EXPECT_EQ(call(*a, "call_method", {{"method_id", "ns=2;s=set_mode"}, {"args", 5}}).error_class(),
            ErrorClass::invalid_input);
}

TEST_F(UaAdapterTest, ProbePrecedesEveryOperation) {
  auto a = make();
  const auto before = mock_->requests_served();
  ASSERT_TRUE(call(*a, "read_node", {{"node_id", "ns=2;s=ph"}}).ok());
  EXPECT_EQ(mock_->requests_served() - before, 2u);
  EXPECT_EQ(a->client().status().probes, 1u);
}

TEST_F(UaAdapterTest, RestartIsRecoveredInTheSameSession) {
  auto a = make();
  ASSERT_TRUE(call(*a, "read_node", {{"node_id", "ns=2;s=ph"}}).ok());
  const auto port = port_;
  mock_.reset();
  start_mock(port);
  const auto r = call(*a, "read_node", {{"node_id", "ns=2;s=ph"}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(r.meta().attempts, 2);
  EXPECT_EQ(a->client().status().reconnects, 1u);
  EXPECT_EQ(call(*a, "server_status").meta().attempts, 1);
}

TEST_F(UaAdapterTest, DownEndpointIsUnreachable) {
  auto a = make();
  mock_.reset();
  const auto r = call(*a, "server_status");
  EXPECT_EQ(r.error_class(), ErrorClass::endpoint_unreachable);
  EXPECT_EQ(r.meta().attempts, 2);
  EXPECT_EQ(r.error()->details["attempts"], 2);
}

TEST(UaAdapterConfig, ReadsEnvironment) {
  ::setenv("UA_ENDPOINT", "opc.tcp://10.0.0.5:4841", 1);
  auto cfg = config_from_env();
  EXPECT_EQ(cfg.client.endpoint.host, "10.0.0.5");
  EXPECT_EQ(cfg.client.endpoint.port, 4841);
  ::unsetenv("UA_ENDPOINT");
  ::setenv("UA_HOST", "plc.local", 1);
  ::setenv("UA_PORT", "4850", 1);
  cfg = config_from_env();
  EXPECT_EQ(cfg.client.endpoint.host, "plc.local");
  EXPECT_EQ(cfg.client.endpoint.port, 4850);
  ::setenv("UA_PORT", "70000", 1);
  EXPECT_THROW(config_from_env(), std::invalid_argument);
  ::unsetenv("UA_HOST");
  ::unsetenv("UA_PORT");
  cfg = config_from_env();
  EXPECT_EQ(cfg.client.endpoint.port, 4840);
}
