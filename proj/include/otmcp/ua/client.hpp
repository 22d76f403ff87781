#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "otmcp/net.hpp"
#include "otmcp/ua/model.hpp"

namespace otmcp::ua {

struct LivenessConfig {
  NodeId status_node = kServerStatusNode;
  bool probe_before_each_op = true;
  int reconnect_retries = 1;
};

struct ClientOptions {
  net::Endpoint endpoint{"127.0.0.1", 4840};
  LivenessConfig liveness;
  std::chrono::milliseconds connect_timeout{1000};
  std::chrono::milliseconds response_timeout{2000};
};

struct ClientStatus {
  bool connected = false;
  std::uint64_t connects = 0;
  std::uint64_t reconnects = 0;
  std::uint64_t requests = 0;
  std::uint64_t probes = 0;
  std::string last_error;
};

/// Session to the node-model server. Before each operation the session is
/// probed by reading the status node; a failed probe tears the session
/// down and reconnects up to `reconnect_retries` times. Probe and
/// operation run under one lock, so each call sees one session.
class Client {
 public:
  explicit Client(ClientOptions options);
  ~Client();

  struct Reply {
    json result;
    int attempts = 1;
  };

  /// Runs one wire operation. Throws Failure: the server's error class for
  /// rejected operations, endpoint_unreachable or timeout once the retries
  /// are spent (details {endpoint, attempts, cause}), protocol_error for a
  /// malformed response.
  Reply request(const std::string& op, const json& params = json::object());

  ClientStatus status() const;
  void disconnect();
  const ClientOptions& options() const noexcept { return options_; }
  std::string endpoint_uri() const { return "opc.tcp://" + options_.endpoint.to_string(); }

 private:
  json exchange_locked(const std::string& op, const json& params);
  void drop_locked(const std::string& why);

  ClientOptions options_;
  mutable std::mutex mu_;
  net::Fd sock_;
  std::unique_ptr<net::LineReader> reader_;
  std::uint64_t next_id_ = 1;
  ClientStatus status_;
};

}  // namespace otmcp::ua
