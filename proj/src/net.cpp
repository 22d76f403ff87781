#include "otmcp/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

namespace otmcp::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw NetError("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace

Fd& Fd::operator=(Fd&& other) noexcept {
  if (this != &other) reset(other.release());
  return *this;
}

int Fd::release() noexcept {
  int fd = fd_;
  fd_ = -1;
  return fd;
}

void Fd::reset(int fd) noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = fd;
}

Fd tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout) {
  const auto addr = resolve(ep);
  Fd sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw NetError(errno_text("socket"));

  const int flags = ::fcntl(sock.get(), F_GETFL, 0);
  ::fcntl(sock.get(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(sock.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    throw NetError(errno_text(("connect " + ep.to_string()).c_str()));
  }
  if (rc != 0) {
    pollfd pfd{sock.get(), POLLOUT, 0};
    rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc == 0) throw NetError("connect " + ep.to_string() + ": timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(sock.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw NetError("connect " + ep.to_string() + ": " + std::strerror(err));
    }
  }
  ::fcntl(sock.get(), F_SETFL, flags);
  set_nodelay(sock.get());
  return sock;
}

Fd tcp_listen(const Endpoint& ep, int backlog) {
  const auto addr = resolve(ep);
  Fd sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) throw NetError(errno_text("socket"));
  int one = 1;
  ::setsockopt(sock.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(sock.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw NetError(errno_text(("bind " + ep.to_string()).c_str()));
  }
  if (::listen(sock.get(), backlog) != 0) throw NetError(errno_text("listen"));
  return sock;
}

std::uint16_t local_port(const Fd& sock) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(sock.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    throw NetError(errno_text("getsockname"));
  }
  return ntohs(addr.sin_port);
}

Fd tcp_accept(const Fd& listener) {
  for (;;) {
    int fd = ::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      set_nodelay(fd);
      return Fd(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return Fd();
  }
}

void send_all(const Fd& sock, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(sock.get(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(n);
  }
}

void send_all(const Fd& sock, std::string_view text) {
  send_all(sock, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

bool recv_exact(const Fd& sock, std::span<std::uint8_t> out) {
  std::size_t got = 0;
  while (got < out.size()) {
    ssize_t n = ::recv(sock.get(), out.data() + got, out.size() - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw NetError("connection closed mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw NetError("receive timed out");
      throw NetError(errno_text("recv"));
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

bool wait_readable(const Fd& sock, std::chrono::milliseconds timeout) {
  pollfd pfd{sock.get(), POLLIN, 0};
  for (;;) {
    int rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    return rc > 0;
  }
}

void set_recv_timeout(const Fd& sock, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(sock.get(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void shutdown_both(const Fd& sock) noexcept {
  if (sock) ::shutdown(sock.get(), SHUT_RDWR);
}

std::optional<std::string> LineReader::next() {
  for (;;) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    char chunk[4096];
    ssize_t n = ::read(fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      eof_ = true;
    } else if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

bool wait_port_open(const Endpoint& ep, std::chrono::milliseconds timeout,
                    std::chrono::milliseconds interval) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    try {
      Fd probe = tcp_connect(ep, std::chrono::milliseconds(200));
      return true;
    } catch (const NetError&) {
    }
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(interval);
  }
}

Endpoint parse_endpoint(std::string_view text, std::uint16_t default_port) {
  Endpoint ep;
  ep.port = default_port;
  if (auto scheme = text.find("://"); scheme != std::string_view::npos) {
    text.remove_prefix(scheme + 3);
  }
  if (auto slash = text.find('/'); slash != std::string_view::npos) text = text.substr(0, slash);
  if (auto colon = text.rfind(':'); colon != std::string_view::npos) {
    ep.host = std::string(text.substr(0, colon));
    const auto port_text = std::string(text.substr(colon + 1));
    int port = 0;
    try {
      port = std::stoi(port_text);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad port in endpoint: " + std::string(text));
    }
    if (port <= 0 || port > 65535) throw std::invalid_argument("port out of range: " + port_text);
    ep.port = static_cast<std::uint16_t>(port);
  } else if (!text.empty()) {
    ep.host = std::string(text);
  }
  if (ep.host.empty()) ep.host = "127.0.0.1";
  return ep;
}

}  // namespace otmcp::net
