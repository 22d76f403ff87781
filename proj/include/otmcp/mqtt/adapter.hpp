#pragma once

#include <mutex>
#include <string>

#include "otmcp/mcp.hpp"
#include "otmcp/mqtt/client.hpp"
#include "otmcp/sparkplug/sparkplug.hpp"

namespace otmcp::mqtt {

struct AdapterConfig {
  ClientOptions client;
  std::string group_id{sparkplug::Defaults::group_id};
  std::string edge_node_id{sparkplug::Defaults::edge_node_id};
};

/// MQTT_HOST, MQTT_PORT, MQTT_CLIENT_ID, MQTT_RECONNECT_INITIAL_S,
/// SPARKPLUG_GROUP_ID and SPARKPLUG_EDGE_NODE_ID. Throws
/// std::invalid_argument for a bad port.
AdapterConfig config_from_env();

/// The 15 MQTT and Sparkplug tools over one broker connection. The client
/// connects on construction and keeps reconnecting per its policy.
class Adapter {
 public:
  explicit Adapter(AdapterConfig config);
  ~Adapter();

  const mcp::ToolRegistry& registry() const noexcept { return registry_; }
  Client& client() noexcept { return client_; }
  std::string endpoint_uri() const;

 private:
  struct SpResult {
    std::string topic;
    std::optional<std::uint64_t> seq;
    std::size_t bytes = 0;
    bool auto_nbirth = false;
  };

  void register_tools();
  /// Publishes one Sparkplug message, emitting NBIRTH first when the
  /// current session has none yet and the type needs it.
  SpResult sp_publish(sparkplug::MessageType type, const std::string& edge_node_id,
                      const std::optional<std::string>& device_id, std::vector<sparkplug::Metric> metrics);
  std::size_t publish_raw(const sparkplug::Topic& topic, const sparkplug::Payload& payload);

  AdapterConfig config_;
  Client client_;
  mcp::ToolRegistry registry_;

  std::mutex sp_mu_;
  sparkplug::SeqCounter seq_;
  std::uint64_t bd_seq_ = 0;
  bool born_ = false;
  bool ever_born_ = false;
};

/// Runs the adapter as an MCP stdio server until stdin closes.
int run_stdio_server();

}  // namespace otmcp::mqtt
