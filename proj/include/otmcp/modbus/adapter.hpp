#pragma once

#include <memory>

#include "otmcp/mcp.hpp"
#include "otmcp/modbus/client.hpp"
#include "otmcp/modbus/typed.hpp"

namespace otmcp::modbus {

struct AdapterConfig {
  ClientOptions client;
  bool writes_enabled = true;
  /// Fault-injection switch: skips the uint16 range check and truncates.
  bool skip_uint16_check = false;
  AliasMap aliases = AliasMap::plant_default();
};

/// MODBUS_HOST, MODBUS_PORT, MODBUS_WRITES_ENABLED, MODBUS_ALIAS_FILE and
/// OTMCP_FAULT_SKIP_UINT16_CHECK. Throws std::invalid_argument for a bad
/// alias file or port.
AdapterConfig config_from_env();

/// The 20 Modbus tools over one Client.
class Adapter {
 public:
  explicit Adapter(AdapterConfig config);

  const mcp::ToolRegistry& registry() const noexcept { return registry_; }
  Client& client() noexcept { return client_; }
  const AdapterConfig& config() const noexcept { return config_; }
  std::string endpoint_uri() const;

 private:
  void register_tools();

  AdapterConfig config_;
  Client client_;
  mcp::ToolRegistry registry_;
};

/// Runs the adapter as an MCP stdio server until stdin closes.
int run_stdio_server();

}  // namespace otmcp::modbus
