#pragma once

#include "otmcp/mcp.hpp"
#include "otmcp/ua/client.hpp"

namespace otmcp::ua {

struct AdapterConfig {
  ClientOptions client;
};

/// UA_ENDPOINT (an opc.tcp:// URI or host:port), else UA_HOST and UA_PORT.
/// Throws std::invalid_argument for a bad port.
AdapterConfig config_from_env();

/// The 7 node-model tools over one Client.
class Adapter {
 public:
  explicit Adapter(AdapterConfig config);

  const mcp::ToolRegistry& registry() const noexcept { return registry_; }
  Client& client() noexcept { return client_; }
  std::string endpoint_uri() const { return client_.endpoint_uri(); }

 private:
  void register_tools();

  AdapterConfig config_;
  Client client_;
  mcp::ToolRegistry registry_;
};

/// Runs the adapter as an MCP stdio server until stdin closes.
int run_stdio_server();

}  // namespace otmcp::ua
