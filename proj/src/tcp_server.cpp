#include "otmcp/tcp_server.hpp"

namespace otmcp {

TcpServer::TcpServer(net::Endpoint bind, Handler handler)
    : bind_(std::move(bind)), handler_(std::move(handler)) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  if (running_) return;
  listener_ = net::tcp_listen(bind_);
  port_ = net::local_port(listener_);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpServer::accept_loop() {
  while (running_) {
    net::Fd conn = net::tcp_accept(listener_);
    if (!conn) break;
    if (!running_) break;
    reap(false);
    auto c = std::make_unique<Connection>();
    c->fd = std::move(conn);
    Connection* raw = c.get();
    std::lock_guard lock(mu_);
    connections_.push_back(std::move(c));
    raw->worker = std::thread([this, raw] {
      try {
        handler_(raw->fd);
      } catch (const std::exception&) {
        // a broken peer only ends its own connection
      }
      net::shutdown_both(raw->fd);
      raw->done = true;
    });
  }
}

void TcpServer::reap(bool all) {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::lock_guard lock(mu_);
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (all || (*it)->done) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    net::shutdown_both(c->fd);
    if (c->worker.joinable()) c->worker.join();
  }
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  net::shutdown_both(listener_);
  if (acceptor_.joinable()) acceptor_.join();
  listener_.reset();
  reap(true);
}

std::size_t TcpServer::active_connections() {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& c : connections_) n += c->done ? 0 : 1;
  return n;
}

}  // namespace otmcp
