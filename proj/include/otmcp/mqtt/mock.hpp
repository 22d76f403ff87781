#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "otmcp/mqtt/broker.hpp"
#include "otmcp/mqtt/client.hpp"
#include "otmcp/sparkplug/sparkplug.hpp"

namespace otmcp::mqtt {

struct SimMetric {
  std::string name;
  double base = 0.0;
  double amplitude = 0.0;
  double period_s = 60.0;
};

struct SimDevice {
  std::string device_id;
  std::vector<SimMetric> metrics;
};

/// device-1 {temperature, humidity}, device-2 {pressure, flow}.
std::vector<SimDevice> default_devices();

/// base + amplitude * sin(2*pi*t/period).
double metric_value(const SimMetric& m, double t_s);

struct SimulatorOptions {
  net::Endpoint broker{"127.0.0.1", 1883};
  std::string group_id{sparkplug::Defaults::group_id};
  std::string edge_node_id{sparkplug::Defaults::edge_node_id};
  std::vector<SimDevice> devices = default_devices();
  double tick_hz = 1.0;
};

/// Sparkplug B edge node. Each (re)connect publishes NBIRTH (seq 0, bdSeq)
/// and one DBIRTH per device; every tick publishes one DDATA per device.
/// Tick k carries values at t = k / tick_hz.
class Simulator {
 public:
  explicit Simulator(SimulatorOptions options);
  ~Simulator();

  void start();
  /// Publishes NDEATH when connected, then disconnects.
  void stop();
  std::uint64_t ticks() const noexcept { return ticks_; }
  std::uint64_t births() const noexcept { return births_; }

 private:
  void publish_births();
  void publish_ddata(double t_s);
  void publish(sparkplug::MessageType type, const std::optional<std::string>& device, sparkplug::Payload payload,
               bool with_seq);
  std::vector<sparkplug::Metric> device_metrics(const SimDevice& d, double t_s) const;

  SimulatorOptions options_;
  Client client_;
  std::mutex seq_mu_;
  sparkplug::SeqCounter seq_;
  std::uint64_t bd_seq_ = 0;
  bool session_live_ = false;
  std::atomic<std::uint64_t> ticks_{0};
  std::atomic<std::uint64_t> births_{0};
  double t_now_ = 0.0;

  std::thread loop_;
  std::mutex loop_mu_;
  std::condition_variable loop_cv_;
  bool stop_ = false;
};

struct MqttMockOptions {
  net::Endpoint bind{"127.0.0.1", 1883};
  bool simulate = true;
  double tick_hz = 1.0;
  std::string group_id{sparkplug::Defaults::group_id};
  std::string edge_node_id{sparkplug::Defaults::edge_node_id};
};

/// Broker plus an in-process simulator connected to it.
class MqttMock {
 public:
  explicit MqttMock(MqttMockOptions options);
  ~MqttMock();

  void start();
  void stop();
  std::uint16_t port() const noexcept { return broker_.port(); }
  Broker& broker() noexcept { return broker_; }
  Simulator* simulator() noexcept { return sim_.get(); }

 private:
  MqttMockOptions options_;
  Broker broker_;
  std::unique_ptr<Simulator> sim_;
};

}  // namespace otmcp::mqtt
