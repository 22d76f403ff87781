#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "otmcp/modbus/codec.hpp"
#include "otmcp/net.hpp"
#include "otmcp/plant.hpp"
#include "otmcp/tcp_server.hpp"

namespace otmcp::modbus {

inline constexpr std::size_t kBankSize = 100;

struct RegisterBank {
  std::array<std::uint16_t, kBankSize> holding{};
  std::array<std::uint16_t, kBankSize> input{};
  std::array<bool, kBankSize> coils{};
  std::array<bool, kBankSize> discrete{};

  bool operator==(const RegisterBank&) const = default;
};

/// Register addresses of the named plant points.
namespace plant_map {
inline constexpr std::uint16_t valve_position = 0;
inline constexpr std::uint16_t heater_power = 1;
inline constexpr std::uint16_t fan_speed = 2;
inline constexpr std::uint16_t conveyor_speed = 3;
inline constexpr std::uint16_t command_word = 4;

inline constexpr std::uint16_t temperature = 0;
inline constexpr std::uint16_t pressure = 1;
inline constexpr std::uint16_t flow_rate = 2;
inline constexpr std::uint16_t tank_level = 3;
inline constexpr std::uint16_t vibration = 4;
inline constexpr std::uint16_t ph = 5;
inline constexpr std::uint16_t humidity = 6;
inline constexpr std::uint16_t motor_speed = 7;
inline constexpr std::uint16_t production_count = 8;

inline constexpr std::uint16_t pump_running = 0;
inline constexpr std::uint16_t emergency_stop = 1;

inline constexpr std::uint16_t pump_feedback = 0;   // discrete input
inline constexpr std::uint16_t high_temp_alarm = 1;  // discrete input
}  // namespace plant_map

/// Sensor fixed-point scale: physical value x10 in a uint16 register.
inline constexpr double kSensorScale = 10.0;

struct DeviceIdentity {
  std::string vendor = "OTMCP Mock Devices";
  std::string product = "PLANT-SIM-100";
  std::string revision = "1.0.0";
};

struct FrameLogEntry {
  std::uint16_t transaction_id = 0;
  std::uint8_t unit_id = 0;
  std::uint8_t function = 0;
};

/// Modbus device state: four 100-point banks backed by a plant simulation.
/// All operations are mutually exclusive; each request sees one snapshot.
class ModbusDevice {
 public:
  explicit ModbusDevice(DeviceIdentity identity = {}, plant::Constants constants = {});

  /// Answers a decoded request. Out-of-range addresses or quantities yield
  /// exception 0x02 / 0x03, anything that is not a request yields 0x01.
  Pdu handle_pdu(std::uint8_t unit_id, const Pdu& request);

  void sim_tick(double dt_s);

  RegisterBank snapshot() const;
  plant::PlantState plant() const;

  void record_frame(const FrameLogEntry& entry);
  std::vector<FrameLogEntry> frame_log() const;
  /// Also append each logged frame to `path` as "txn=<n> unit=<n> fc=0x<hh>".
  void set_frame_log_file(const std::string& path);

 private:
  void publish_sensors();  // plant -> input registers / discrete inputs
  void pull_actuators();   // holding registers / coils -> plant

  mutable std::mutex mu_;
  RegisterBank bank_;
  plant::PlantState plant_;
  plant::Constants constants_;
  DeviceIdentity identity_;
  std::vector<FrameLogEntry> log_;
  std::ofstream log_file_;
};

struct MockOptions {
  net::Endpoint bind{"127.0.0.1", 1502};
  double tick_hz = 1.0;
  bool simulate = true;
  std::string frame_log_path;
};

/// Modbus TCP server in front of a ModbusDevice, with its simulation loop.
class ModbusMock {
 public:
  explicit ModbusMock(MockOptions options);
  ~ModbusMock();

  void start();
  void stop();
  std::uint16_t port() const noexcept { return server_.port(); }
  ModbusDevice& device() noexcept { return device_; }

 private:
  void serve_connection(const net::Fd& conn);

  MockOptions options_;
  ModbusDevice device_;
  TcpServer server_;
  std::thread sim_;
  std::mutex sim_mu_;
  std::condition_variable sim_cv_;
  bool sim_stop_ = false;
};

}  // namespace otmcp::modbus
