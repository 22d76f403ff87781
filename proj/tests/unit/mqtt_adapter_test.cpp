#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "otmcp/mqtt/adapter.hpp"
#include "otmcp/mqtt/mock.hpp"

using namespace otmcp;
using namespace otmcp::mqtt;
using namespace std::chrono_literals;

namespace {

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds timeout = 3000ms) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

class MqttAdapterTest : public ::testing::Test {
 protected:
  void SetUp() override { start_broker(0); }

  void start_broker(std::uint16_t port) {
    MqttMockOptions o;
    o.bind = {"127.0.0.1", port};
    o.simulate = false;
    mock_ = std::make_unique<MqttMock>(o);
    mock_->start();
    port_ = mock_->port();
  }

  std::unique_ptr<Adapter> make(double initial_delay = 1.0, const std::string& id = "adapter") {
    AdapterConfig cfg;
    cfg.client.endpoint = {"127.0.0.1", port_};
    cfg.client.client_id = id;
    cfg.client.policy.initial_delay_s = initial_delay;
    return std::make_unique<Adapter>(std::move(cfg));
  }

  static Envelope call(const Adapter& a, std::string_view tool, const json& args = json::object()) {
    auto env = a.registry().invoke(tool, args);
    EXPECT_TRUE(env.has_value()) << tool;
    EXPECT_TRUE(validate_envelope(env->to_json()).empty()) << env->serialize();
    return *env;
  }

  std::unique_ptr<MqttMock> mock_;
  std::uint16_t port_ = 0;
};

}  // namespace

TEST_F(MqttAdapterTest, ExposesFifteenTools) {
  auto a = make();
  const auto list = a->registry().list();
  std::set<std::string> names;
  for (const auto& t : list) names.insert(t["name"].get<std::string>());
  const std::set<std::string> expect{
      "broker_info",       "connection_status", "subscribe",         "unsubscribe",       "list_subscriptions",
      "publish",           "get_messages",      "clear_messages",    "sp_publish_nbirth", "sp_publish_ndeath",
      "sp_publish_dbirth", "sp_publish_ddeath", "sp_publish_ddata",  "sp_publish_ncmd",   "sp_publish_dcmd"};
  EXPECT_EQ(names, expect);
}

TEST_F(MqttAdapterTest, BrokerInfoReportsConnection) {
  auto a = make();
  const auto env = call(*a, "broker_info");
  ASSERT_TRUE(env.ok()) << env.serialize();
  EXPECT_EQ(env.data()["connected"], true);
  EXPECT_EQ(env.data()["broker_returns_connack_code"], 0);
  EXPECT_EQ(env.data()["subscriptions_count"], 0);
  EXPECT_EQ(env.meta().protocol, "mqtt");
  EXPECT_EQ(env.meta().endpoint, "mqtt://127.0.0.1:" + std::to_string(port_));
}

TEST_F(MqttAdapterTest, SubscribePublishAndRead) {
  auto a = make();
  const auto sub = call(*a, "subscribe", {{"topic_filter", "factory/#"}, {"qos", 0}});
  ASSERT_TRUE(sub.ok()) << sub.serialize();
  EXPECT_EQ(sub.data()["granted_qos"], json::array({0}));

  const auto pub = call(*a, "publish", {{"topic", "factory/line1/cmd"}, {"payload", "START"}, {"qos", 0}});
  ASSERT_TRUE(pub.ok()) << pub.serialize();
  EXPECT_EQ(pub.data()["bytes"], 5);
  EXPECT_FALSE(pub.data().contains("packet_id"));

  const auto pub1 = call(*a, "publish", {{"topic", "factory/line1/cmd"}, {"payload", "STOP"}, {"qos", 1}});
  ASSERT_TRUE(pub1.ok());
  EXPECT_TRUE(pub1.data().contains("packet_id"));

  ASSERT_TRUE(eventually([&] { return a->client().messages().size() == 2; }));
  const auto got = call(*a, "get_messages", {{"filter", "factory/+/cmd"}, {"limit", 10}});
  ASSERT_TRUE(got.ok());
  ASSERT_EQ(got.data()["count"], 2);
  EXPECT_EQ(got.data()["messages"][0]["payload"], "START");
  EXPECT_EQ(got.data()["messages"][1]["payload"], "STOP");

  EXPECT_EQ(call(*a, "list_subscriptions").data()["count"], 1);
  EXPECT_EQ(call(*a, "clear_messages").data()["cleared"], 2);
  const auto un = call(*a, "unsubscribe", {{"topic_filter", "factory/#"}});
  EXPECT_EQ(un.data()["was_subscribed"], true);
  EXPECT_EQ(call(*a, "list_subscriptions").data()["count"], 0);
}

TEST_F(MqttAdapterTest, InvalidPublishesAreRejected) {
  auto a = make();
  const auto empty = call(*a, "publish", {{"topic", ""}, {"payload", "x"}});
  EXPECT_EQ(empty.error_class(), ErrorClass::invalid_input);
  const auto qos5 = call(*a, "publish", {{"topic", "ctl/valve"}, {"payload", "x"}, {"qos", 5}});
  EXPECT_EQ(qos5.error_class(), ErrorClass::invalid_input);
  const auto qos2 = call(*a, "publish", {{"topic", "ctl/valve"}, {"payload", "x"}, {"qos", 2}});
  EXPECT_EQ(qos2.error_class(), ErrorClass::invalid_input);
  EXPECT_NE(qos2.error()->message, qos5.error()->message);
  const auto wildcard = call(*a, "publish", {{"topic", "ctl/#"}, {"payload", "x"}});
  EXPECT_EQ(wildcard.error_class(), ErrorClass::invalid_input);
  const auto bad_filter = call(*a, "subscribe", {{"topic_filter", "a/#/b"}});
  EXPECT_EQ(bad_filter.error_class(), ErrorClass::invalid_input);
  const auto bad_limit = call(*a, "get_messages", {{"limit", 0}});
  EXPECT_EQ(bad_limit.error_class(), ErrorClass::invalid_input);
}

TEST_F(MqttAdapterTest, BinaryPayloadsRoundTripAsHex) {
  auto a = make();
  call(*a, "subscribe", {{"topic_filter", "bin"}});
  const auto pub = call(*a, "publish", {{"topic", "bin"}, {"payload_hex", "00ff10"}});
  ASSERT_TRUE(pub.ok()) << pub.serialize();
  ASSERT_TRUE(eventually([&] { return a->client().messages().size() == 1; }));
  const auto got = call(*a, "get_messages");
  EXPECT_EQ(got.data()["messages"][0]["payload_hex"], "00ff10");
  EXPECT_EQ(call(*a, "publish", {{"topic", "bin"}, {"payload_hex", "0g"}}).error_class(), ErrorClass::invalid_input);
}

TEST_F(MqttAdapterTest, DdataAutoBirthsThenCountsSeq) {
  auto a = make();
  call(*a, "subscribe", {{"topic_filter", "spBv1.0/#"}});
  const auto first = call(*a, "sp_publish_ddata",
                          {{"device_id", "device-1"}, {"metrics", {{{"name", "temperature"}, {"float", 25.0}}}}});
  ASSERT_TRUE(first.ok()) << first.serialize();
  EXPECT_EQ(first.data()["topic"], "spBv1.0/mock-plant/DDATA/edge-node-1/device-1");
  EXPECT_EQ(first.data()["auto_nbirth"], true);
  EXPECT_EQ(first.data()["seq"], 1);

  const auto second = call(*a, "sp_publish_ddata",
                           {{"device", "device-1"}, {"metrics", {{{"name", "temperature"}, {"float", 26.0}}}}});
  EXPECT_EQ(second.data()["auto_nbirth"], false);
  EXPECT_EQ(second.data()["seq"], 2);

  ASSERT_TRUE(eventually([&] { return a->client().messages().size() == 3; }));
  const auto got = call(*a, "get_messages");
  const auto& msgs = got.data()["messages"];
  EXPECT_EQ(msgs[0]["sparkplug"]["message_type"], "NBIRTH");
  EXPECT_EQ(msgs[0]["sparkplug"]["seq"], 0);
  EXPECT_EQ(msgs[1]["sparkplug"]["metrics"][0]["value"], 25.0);
  EXPECT_EQ(msgs[1]["sparkplug"]["metrics"][0]["datatype"], "Float");
  EXPECT_EQ(msgs[2]["sparkplug"]["seq"], 2);
}

TEST_F(MqttAdapterTest, SparkplugLifecycleTools) {
  auto a = make();
  const auto birth = call(*a, "sp_publish_nbirth");
  ASSERT_TRUE(birth.ok()) << birth.serialize();
  EXPECT_EQ(birth.data()["seq"], 0);
  EXPECT_EQ(call(*a, "sp_publish_dbirth", {{"device_id", "device-2"}}).data()["seq"], 1);
  EXPECT_EQ(call(*a, "sp_publish_ddeath", {{"device_id", "device-2"}}).data()["seq"], 2);
  const auto cmd = call(*a, "sp_publish_dcmd",
                        {{"device_id", "device-1"}, {"metrics", {{{"name", "reset"}, {"boolean", true}}}}});
  ASSERT_TRUE(cmd.ok()) << cmd.serialize();
  EXPECT_TRUE(cmd.data()["seq"].is_null());
  const auto ncmd = call(*a, "sp_publish_ncmd",
                         {{"edge_node_id", "edge-node-9"}, {"metrics", {{{"name", "Node Control/Rebirth"}, {"boolean", true}}}}});
  EXPECT_EQ(ncmd.data()["topic"], "spBv1.0/mock-plant/NCMD/edge-node-9");
  const auto death = call(*a, "sp_publish_ndeath");
  EXPECT_TRUE(death.data()["seq"].is_null());
  const auto again = call(*a, "sp_publish_ddata",
                          {{"device_id", "device-1"}, {"metrics", {{{"name", "t"}, {"value", 1.5}}}}});
  EXPECT_EQ(again.data()["auto_nbirth"], true);

  EXPECT_EQ(call(*a, "sp_publish_ddata", {{"device_id", "device-1"}, {"metrics", json::array()}}).error_class(),
            ErrorClass::invalid_input);
  EXPECT_EQ(call(*a, "sp_publish_ddata", {{"device_id", "dev/1"}, {"metrics", {{{"name", "t"}, {"float", 1}}}}})
                .error_class(),
            ErrorClass::invalid_input);
  EXPECT_EQ(call(*a, "sp_publish_ddata", {{"device_id", "d"}, {"metrics", {{{"name", "t"}, {"int32", "x"}}}}})
                .error_class(),
            ErrorClass::type_mismatch);
}

TEST_F(MqttAdapterTest, DisconnectedToolsFailFast) {
  auto a = make(30.0);
  mock_.reset();
  ASSERT_TRUE(eventually([&] { return a->client().status().losses == 1; }));
  for (const auto& [tool, args] : std::vector<std::pair<std::string, json>>{
           {"broker_info", json::object()},
           {"publish", {{"topic", "a"}, {"payload", "b"}}},
           {"subscribe", {{"topic_filter", "a/#"}}},
           {"sp_publish_ddata", {{"device_id", "device-1"}, {"metrics", {{{"name", "t"}, {"float", 1}}}}}}}) {
    const auto env = call(*a, tool, args);
    EXPECT_EQ(env.error_class(), ErrorClass::endpoint_unreachable) << tool;
  }
  const auto status = call(*a, "connection_status");
  ASSERT_TRUE(status.ok());
  EXPECT_EQ(status.data()["connected"], false);
  EXPECT_EQ(status.data()["connection_losses"], 1);
}

TEST_F(MqttAdapterTest, RecoversAfterBrokerRestartAndRebirths) {
  auto a = make(0.2);
  call(*a, "subscribe", {{"topic_filter", "spBv1.0/#"}});
  ASSERT_TRUE(call(*a, "sp_publish_nbirth").ok());
  const auto port = port_;
  mock_.reset();
  ASSERT_TRUE(eventually([&] { return !a->client().connected(); }));
  start_broker(port);
  ASSERT_TRUE(eventually([&] { return a->client().connected(); }));
  const auto r = call(*a, "sp_publish_ddata",
                      {{"device_id", "device-1"}, {"metrics", {{{"name", "temperature"}, {"float", 21.0}}}}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(r.data()["auto_nbirth"], true);
  EXPECT_EQ(r.data()["seq"], 1);
  ASSERT_TRUE(eventually([&] { return a->client().messages().size() >= 3; }));
  const auto got = call(*a, "get_messages", {{"filter", "spBv1.0/+/NBIRTH/#"}});
  const auto& births = got.data()["messages"];
  ASSERT_EQ(births.size(), 2u);
  EXPECT_EQ(births[1]["sparkplug"]["metrics"][0]["name"], "bdSeq");
  EXPECT_EQ(births[1]["sparkplug"]["metrics"][0]["value"], 1);
}

TEST_F(MqttAdapterTest, ReadsSimulatorStream) {
  mock_.reset();
  MqttMockOptions o;
  o.bind = {"127.0.0.1", 0};
  o.tick_hz = 20.0;
  mock_ = std::make_unique<MqttMock>(o);
  mock_->start();
  port_ = mock_->port();
  auto a = make();
  call(*a, "subscribe", {{"topic_filter", "spBv1.0/mock-plant/DDATA/edge-node-1/device-2"}});
  ASSERT_TRUE(eventually([&] { return a->client().messages().size() >= 2; }));
  const auto got = call(*a, "get_messages", {{"limit", 1}});
  ASSERT_EQ(got.data()["count"], 1);
  const auto& metrics = got.data()["messages"][0]["sparkplug"]["metrics"];
  EXPECT_EQ(metrics[0]["name"], "pressure");
  EXPECT_NEAR(metrics[0]["value"].get<double>(), 1013.0, 20.0 + 1e-3);
}
