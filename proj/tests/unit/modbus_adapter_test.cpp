#include <gtest/gtest.h>

#include <future>
#include <set>

#include "otmcp/modbus/adapter.hpp"
#include "otmcp/modbus/mock.hpp"

using namespace otmcp;
using namespace otmcp::modbus;

namespace {

class ModbusAdapterTest : public ::testing::Test {
 protected:
  void SetUp() override {
    mock_ = std::make_unique<ModbusMock>(MockOptions{{"127.0.0.1", 0}, 1.0, false, {}});
    mock_->start();
    port_ = mock_->port();
  }

  std::unique_ptr<Adapter> make(bool writes = true, bool skip = false) {
    AdapterConfig cfg;
    cfg.client.endpoint = {"127.0.0.1", port_};
    cfg.client.connect_timeout = std::chrono::milliseconds(300);
    cfg.writes_enabled = writes;
    cfg.skip_uint16_check = skip;
    return std::make_unique<Adapter>(std::move(cfg));
  }

  static Envelope call(const Adapter& a, std::string_view tool, const json& args = json::object()) {
    auto env = a.registry().invoke(tool, args);
    EXPECT_TRUE(env.has_value()) << tool;
    EXPECT_TRUE(validate_envelope(env->to_json()).empty()) << env->serialize();
    return *env;
  }

  std::size_t write_frames() const {
    std::size_t n = 0;
    for (const auto& f : mock_->device().frame_log()) n += is_write_function(f.function) ? 1 : 0;
    return n;
  }

  std::unique_ptr<ModbusMock> mock_;
  std::uint16_t port_ = 0;
};

}  // namespace

TEST_F(ModbusAdapterTest, ExposesTwentyTools) {
  auto a = make();
  const auto list = a->registry().list();
  ASSERT_EQ(list.size(), 20u);
  const std::set<std::string> expected{
      "ping", "connection_status", "read_holding_registers", "read_input_registers", "read_coils",
      "read_discrete_inputs", "write_register", "write_registers", "write_coil", "write_coils",
      "mask_write_register", "write_register_verified", "read_typed", "write_typed", "read_device_info",
      "list_aliases", "read_alias", "write_alias", "read_register_block", "health_check"};
  std::set<std::string> names;
  for (const auto& t : list) {
    names.insert(t["name"].get<std::string>());
    EXPECT_EQ(t["inputSchema"]["type"], "object");
  }
  EXPECT_EQ(names, expected);
}

TEST_F(ModbusAdapterTest, PingAndSensorRead) {
  auto a = make();
  auto ping = call(*a, "ping");
  EXPECT_TRUE(ping.ok());
  EXPECT_EQ(ping.meta().protocol, "modbus");
  EXPECT_EQ(ping.meta().endpoint, "modbus://127.0.0.1:" + std::to_string(port_));
  auto r = call(*a, "read_input_registers", {{"address", 0}, {"count", 4}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(r.data()["values"], json({234, 1013, 500, 750}));
  EXPECT_EQ(r.data()["kind"], "input");
}

TEST_F(ModbusAdapterTest, WriteThenReadBack) {
  auto a = make();
  auto w = call(*a, "write_register", {{"address", 10}, {"value", 45}});
  ASSERT_TRUE(w.ok()) << w.serialize();
  EXPECT_EQ(w.data()["value"], 45);
  auto r = call(*a, "read_holding_registers", {{"address", 10}, {"count", 1}});
  EXPECT_EQ(r.data()["values"], json({45}));
  auto v = call(*a, "write_register_verified", {{"address", 11}, {"value", 7}});
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.data()["readback"], 7);
}

TEST_F(ModbusAdapterTest, InvalidAddressIsProtocolErrorWithDetail) {
  auto a = make();
  auto r = call(*a, "read_holding_registers", {{"address", 9999}, {"count", 1}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error_class(), ErrorClass::protocol_error);
  EXPECT_EQ(r.error()->details["exception"], "illegal_data_address");
}

TEST_F(ModbusAdapterTest, ZeroCountIsInvalidInput) {
  auto a = make();
  auto r = call(*a, "read_holding_registers", {{"address", 0}, {"count", 0}});
  EXPECT_EQ(r.error_class(), ErrorClass::invalid_input);
  r = call(*a, "read_coils", {{"count", 1}});
  EXPECT_EQ(r.error_class(), ErrorClass::invalid_input);
}

TEST_F(ModbusAdapterTest, OverflowRejectedWithoutAnyFrame) {
  auto a = make();
  const auto before = mock_->device().frame_log().size();
  auto r = call(*a, "write_register", {{"address", 10}, {"value", 70000}});
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error_class(), ErrorClass::range_overflow);
  EXPECT_EQ(r.error()->details["value"], 70000);
  EXPECT_EQ(r.error()->details["max"], 65535);
  EXPECT_EQ(mock_->device().frame_log().size(), before);
  r = call(*a, "write_registers", {{"address", 10}, {"values", {1, -1}}});
  EXPECT_EQ(r.error_class(), ErrorClass::range_overflow);
  EXPECT_EQ(mock_->device().frame_log().size(), before);
}

TEST_F(ModbusAdapterTest, SkippingValidationMakesOverflowSucceed) {
  auto a = make(true, true);
  auto r = call(*a, "write_register", {{"address", 10}, {"value", 70000}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_EQ(mock_->device().snapshot().holding[10], 70000 & 0xFFFF);
}

TEST_F(ModbusAdapterTest, GuardBlocksEveryWriteToolWithoutTraffic) {
  auto a = make(false);
  const std::vector<std::pair<std::string, json>> writes{
      {"write_register", {{"address", 10}, {"value", 42}}},
      {"write_registers", {{"address", 10}, {"values", {1, 2}}}},
      {"write_coil", {{"address", 0}, {"value", false}}},
      {"write_coils", {{"address", 0}, {"values", {true}}}},
      {"mask_write_register", {{"address", 0}, {"and_mask", 0}, {"or_mask", 1}}},
      {"write_register_verified", {{"address", 10}, {"value", 1}}},
      {"write_typed", {{"address", 20}, {"datatype", "float32"}, {"value", 3.5}}},
      {"write_alias", {{"alias", "valve_position"}, {"value", 10}}},
  };
  for (const auto& [tool, args] : writes) {
    auto r = call(*a, tool, args);
    EXPECT_EQ(r.error_class(), ErrorClass::writes_disabled) << tool;
  }
  EXPECT_TRUE(call(*a, "read_holding_registers", {{"address", 0}, {"count", 2}}).ok());
  EXPECT_EQ(write_frames(), 0u);
  EXPECT_EQ(call(*a, "connection_status").data()["writes_enabled"], false);
}

TEST_F(ModbusAdapterTest, TypedFloatLayout) {
  auto a = make();
  auto w = call(*a, "write_typed", {{"address", 20}, {"datatype", "float32"}, {"value", 3.5}});
  ASSERT_TRUE(w.ok()) << w.serialize();
  const auto bank = mock_->device().snapshot();
  EXPECT_EQ(bank.holding[20], 0x4060);
  EXPECT_EQ(bank.holding[21], 0x0000);
  auto r = call(*a, "read_typed", {{"address", 20}, {"datatype", "float32"}});
  EXPECT_EQ(r.data()["value"].get<double>(), 3.5);
  auto bad = call(*a, "write_typed", {{"address", 20}, {"datatype", "uint16"}, {"value", 65536}});
  EXPECT_EQ(bad.error_class(), ErrorClass::range_overflow);
  bad = call(*a, "write_typed", {{"address", 20}, {"datatype", "int32"}, {"value", "x"}});
  EXPECT_EQ(bad.error_class(), ErrorClass::type_mismatch);
}

TEST_F(ModbusAdapterTest, AliasPaths) {
  auto a = make();
  auto temp = call(*a, "read_alias", {{"alias", "temperature"}});
  ASSERT_TRUE(temp.ok()) << temp.serialize();
  EXPECT_EQ(temp.data()["raw"], 234);
  EXPECT_NEAR(temp.data()["value"].get<double>(), 23.4, 1e-9);
  EXPECT_TRUE(call(*a, "write_alias", {{"alias", "valve_position"}, {"value", 33}}).ok());
  EXPECT_EQ(call(*a, "read_alias", {{"alias", "valve_position"}}).data()["value"], 33);
  EXPECT_EQ(call(*a, "read_alias", {{"alias", "xyz"}}).error_class(), ErrorClass::invalid_input);
  EXPECT_EQ(call(*a, "write_alias", {{"alias", "temperature"}, {"value", 1}}).error_class(),
            ErrorClass::invalid_input);
  EXPECT_TRUE(call(*a, "write_alias", {{"alias", "pump_running"}, {"value", false}}).ok());
  EXPECT_FALSE(mock_->device().snapshot().coils[0]);
  auto list = call(*a, "list_aliases");
  EXPECT_EQ(list.data()["count"], 18);
  auto block = call(*a, "read_register_block", {{"group", "sensors"}});
  ASSERT_TRUE(block.ok()) << block.serialize();
  EXPECT_EQ(block.data()["requests"], 1);
  EXPECT_NEAR(block.data()["values"]["pressure"].get<double>(), 101.3, 1e-9);
  EXPECT_EQ(block.data()["values"]["production_count"], 0);
  EXPECT_EQ(call(*a, "read_register_block", {{"group", "nope"}}).error_class(), ErrorClass::invalid_input);
}

TEST_F(ModbusAdapterTest, DeviceInfoAndHealth) {
  auto a = make();
  auto info = call(*a, "read_device_info");
  ASSERT_TRUE(info.ok()) << info.serialize();
  EXPECT_EQ(info.data()["vendor"], DeviceIdentity{}.vendor);
  EXPECT_EQ(info.data()["product"], DeviceIdentity{}.product);
  EXPECT_TRUE(call(*a, "health_check").data()["healthy"].get<bool>());
}

TEST_F(ModbusAdapterTest, UnreachableThenReconnectAfterRestart) {
  auto a = make();
  ASSERT_TRUE(call(*a, "ping").ok());
  mock_->stop();
  mock_.reset();
  auto down = call(*a, "ping");
  EXPECT_EQ(down.error_class(), ErrorClass::endpoint_unreachable);
  EXPECT_EQ(down.meta().attempts, 2);

  mock_ = std::make_unique<ModbusMock>(MockOptions{{"127.0.0.1", port_}, 1.0, false, {}});
  mock_->start();
  EXPECT_TRUE(call(*a, "ping").ok());
}

TEST_F(ModbusAdapterTest, StaleSocketRetriedOnNextCall) {
  auto a = make();
  ASSERT_TRUE(call(*a, "ping").ok());
  mock_->stop();
  mock_ = std::make_unique<ModbusMock>(MockOptions{{"127.0.0.1", port_}, 1.0, false, {}});
  mock_->start();
  auto r = call(*a, "read_input_registers", {{"address", 0}, {"count", 4}});
  ASSERT_TRUE(r.ok()) << r.serialize();
  EXPECT_GE(r.meta().attempts, 2);
}

TEST_F(ModbusAdapterTest, ConcurrentCallsDoNotInterleave) {
  auto a = make();
  std::vector<std::future<Envelope>> futs;
  for (int i = 0; i < 8; ++i) {
    futs.push_back(std::async(std::launch::async, [&, i] {
      if (i % 2) return call(*a, "write_register", {{"address", 30 + i}, {"value", 100 + i}});
      return call(*a, "read_input_registers", {{"address", 0}, {"count", 4}});
    }));
  }
  for (int i = 0; i < 8; ++i) {
    auto env = futs[i].get();
    ASSERT_TRUE(env.ok()) << env.serialize();
    if (i % 2 == 0) {
      EXPECT_EQ(env.data()["values"], json({234, 1013, 500, 750}));
    }
  }
  for (int i = 1; i < 8; i += 2) EXPECT_EQ(mock_->device().snapshot().holding[30 + i], 100 + i);
}
