#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "otmcp/envelope.hpp"

namespace otmcp::mcp {

inline constexpr std::string_view kProtocolVersion = "2024-11-05";

// JSON-RPC 2.0 error codes.
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kInternalError = -32603;

struct ToolDescriptor {
  std::string name;
  std::string description;
  json input_schema;

  json to_json() const;
};

/// Raised by argument accessors; surfaces as an invalid_input envelope.
class ArgError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tracks one tool invocation and stamps the envelope meta on completion.
class CallScope {
 public:
  CallScope(std::string protocol, std::string endpoint);

  void set_attempts(int attempts) { attempts_ = attempts < 1 ? 1 : attempts; }
  int attempts() const noexcept { return attempts_; }
  void trace(std::string key, std::string value) { trace_[std::move(key)] = std::move(value); }

  Envelope ok(json data) const;
  Envelope fail(ErrorClass error_class, std::string message, json details = {}) const;

 private:
  CallMeta meta() const;

  std::chrono::steady_clock::time_point start_;
  std::string protocol_;
  std::string endpoint_;
  int attempts_ = 1;
  std::map<std::string, std::string> trace_;
};

using ToolHandler = std::function<Envelope(const json& args)>;

class ToolRegistry {
 public:
  /// `endpoint` is queried when the registry itself has to synthesize an
  /// envelope (bad arguments, handler failure).
  ToolRegistry(std::string protocol, std::function<std::string()> endpoint);

  /// Throws std::invalid_argument on a duplicate or malformed name, or a
  /// schema whose top-level type is not "object".
  void add(ToolDescriptor descriptor, ToolHandler handler);

  std::size_t size() const noexcept { return tools_.size(); }
  json list() const;
  bool contains(std::string_view name) const;

  /// Runs the named tool. Never throws for handler failures: ArgError maps to
  /// invalid_input and any other exception to an internal-class envelope.
  /// Returns nullopt for an unknown tool name.
  std::optional<Envelope> invoke(std::string_view name, const json& args) const;

  const std::string& protocol() const noexcept { return protocol_; }

 private:
  struct Entry {
    ToolDescriptor descriptor;
    ToolHandler handler;
  };
  std::vector<Entry> tools_;
  std::string protocol_;
  std::function<std::string()> endpoint_;
};

/// MCP tool result: one text block holding the canonical envelope.
json wrap_tool_result(const Envelope& env);

struct ServerInfo {
  std::string name;
  std::string version = "0.1.0";
};

/// Handles one inbound JSON-RPC line synchronously (tools/call included).
/// Returns nullopt for notifications.
std::optional<json> handle_line(const ToolRegistry& registry, const ServerInfo& info,
                                std::string_view line);

struct ServeOptions {
  std::size_t workers = 8;
};

/// Newline-delimited JSON-RPC over the given descriptors until `in_fd` hits
/// EOF. tools/call requests run on a worker pool, so responses may be
/// written out of order; each is written as one whole line.
void serve(const ToolRegistry& registry, const ServerInfo& info, int in_fd, int out_fd,
           ServeOptions options = {});

namespace args {

std::int64_t get_int(const json& a, std::string_view key);
std::optional<std::int64_t> opt_int(const json& a, std::string_view key);
double get_number(const json& a, std::string_view key);
std::string get_string(const json& a, std::string_view key);
std::optional<std::string> opt_string(const json& a, std::string_view key);
bool get_bool(const json& a, std::string_view key);
std::optional<bool> opt_bool(const json& a, std::string_view key);
const json& get_array(const json& a, std::string_view key);
const json& get_value(const json& a, std::string_view key);

}  // namespace args

/// Builds {"type":"object","properties":...,"required":[...]}.
json object_schema(json properties, std::vector<std::string> required = {});

}  // namespace otmcp::mcp
