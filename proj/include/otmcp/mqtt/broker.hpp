#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "otmcp/mqtt/codec.hpp"
#include "otmcp/tcp_server.hpp"

namespace otmcp::mqtt {

/// Minimal MQTT 3.1.1 broker: qos 0/1, retained messages, wildcard routing.
/// A CONNECT with an active client id supersedes the older connection.
/// Keep-alive is not policed.
class Broker {
 public:
  explicit Broker(net::Endpoint bind);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  void start();
  void stop();
  std::uint16_t port() const noexcept { return server_.port(); }

  std::size_t session_count() const;
  std::size_t retained_count() const;
  /// Filters held by `client_id`, empty when the client is unknown.
  std::map<std::string, std::uint8_t> subscriptions_of(const std::string& client_id) const;

 private:
  struct Session;

  void serve(const net::Fd& conn);
  void handle(const std::shared_ptr<Session>& s, Packet& packet);
  void route(const Publish& p);
  void deliver(Session& s, const Publish& p, std::uint8_t qos, bool retain);

  TcpServer server_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Publish> retained_;
  std::uint64_t anonymous_ = 0;
};

}  // namespace otmcp::mqtt
