#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "otmcp/plant.hpp"
#include "otmcp/tcp_server.hpp"
#include "otmcp/ua/model.hpp"

namespace otmcp::ua {

/// Plant node model: Sensors (8 read-only Float), Actuators (4 Float and
/// 2 Boolean, read-write), Status (uptime_s, simulation_tick, device_state)
/// and Methods (start_pump, stop_pump, reset_counters, set_mode, calibrate)
/// under the Objects root, plus the ServerStatus variable. Plant nodes use
/// string ids in namespace 2; every plant node also answers to a numeric
/// alias assigned in build order starting at 1.
class AddressSpace {
 public:
  explicit AddressSpace(plant::Constants constants = {});
  AddressSpace(const AddressSpace&) = delete;
  AddressSpace& operator=(const AddressSpace&) = delete;

  /// Resolves string ids and numeric aliases; nullptr when unknown.
  const NodeInfo* find(const NodeId& id) const;

  // Operations throw Failure: illegal_address for unknown nodes,
  // protocol_error with details.reason access_denied / type_mismatch for
  // rejected writes, invalid_input for bad method arguments.
  json read(const NodeId& id) const;
  void write(const NodeId& id, const json& value, std::optional<DataType> declared);
  std::vector<NodeInfo> browse(const NodeId& id) const;
  /// Depth-first Variable enumeration with values.
  json list(const NodeId& root) const;
  json call(const NodeId& method, const json& args);
  json status() const;

  void sim_tick(double dt_s);
  const plant::PlantState& plant() const noexcept { return plant_; }
  std::string device_state() const { return device_state_; }
  std::size_t count(NodeClass c) const;

 private:
  struct Node {
    NodeInfo info;
    std::vector<NodeId> children;
    std::function<json()> get;
    std::function<void(const json&)> set;
    std::function<json(const json&)> invoke;
  };

  const Node& require(const NodeId& id) const;
  Node& add(const NodeId& parent, Node node);
  NodeId plant_id(const std::string& name) const { return NodeId{kPlantNamespace, name}; }

  plant::Constants constants_;
  plant::PlantState plant_;
  std::string device_state_ = "running";
  std::chrono::steady_clock::time_point started_;
  std::map<NodeId, Node> nodes_;
  std::map<NodeId, NodeId> aliases_;
  std::uint32_t next_alias_ = 1;
};

/// Handles one request object and returns the response object.
json handle_request(AddressSpace& space, std::mutex& mu, const json& request);

struct MockOptions {
  net::Endpoint bind{"127.0.0.1", 4840};
  double tick_hz = 1.0;
  bool simulate = true;
};

/// Newline-delimited JSON node-model server with its simulation loop.
class UaMock {
 public:
  explicit UaMock(MockOptions options);
  ~UaMock();

  void start();
  void stop();
  std::uint16_t port() const noexcept { return server_.port(); }
  AddressSpace& space() noexcept { return space_; }
  std::mutex& mutex() noexcept { return space_mu_; }
  std::uint64_t requests_served() const noexcept { return served_; }

 private:
  void serve_connection(const net::Fd& conn);

  MockOptions options_;
  AddressSpace space_;
  std::mutex space_mu_;
  TcpServer server_;
  std::atomic<std::uint64_t> served_{0};
  std::thread sim_;
  std::mutex sim_mu_;
  std::condition_variable sim_cv_;
  bool sim_stop_ = false;
};

}  // namespace otmcp::ua
