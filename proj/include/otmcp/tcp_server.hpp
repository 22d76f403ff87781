#pragma once

#include <atomic>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <thread>

#include "otmcp/net.hpp"

namespace otmcp {

/// Accept loop with one thread per connection. `stop` shuts every socket
/// down so blocked handlers return, then joins them.
class TcpServer {
 public:
  using Handler = std::function<void(const net::Fd& connection)>;

  TcpServer(net::Endpoint bind, Handler handler);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and starts accepting. Throws net::NetError when the port is taken.
  void start();
  void stop();
  std::uint16_t port() const noexcept { return port_; }
  std::size_t active_connections();

 private:
  struct Connection {
    net::Fd fd;
    std::thread worker;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void reap(bool all);

  net::Endpoint bind_;
  Handler handler_;
  net::Fd listener_;
  std::thread acceptor_;
  std::mutex mu_;
  std::list<std::unique_ptr<Connection>> connections_;
  std::atomic<bool> running_{false};
  std::uint16_t port_ = 0;
};

}  // namespace otmcp
