#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace otmcp::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) noexcept : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(other.release()) {}
  Fd& operator=(Fd&& other) noexcept;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  explicit operator bool() const noexcept { return valid(); }
  int release() noexcept;
  void reset(int fd = -1) noexcept;

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Blocking TCP connect with TCP_NODELAY set. Throws NetError on failure.
Fd tcp_connect(const Endpoint& ep, std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

/// Bound, listening socket with SO_REUSEADDR. Port 0 picks an ephemeral port.
Fd tcp_listen(const Endpoint& ep, int backlog = 64);
std::uint16_t local_port(const Fd& sock);

/// Accepts with TCP_NODELAY set; returns an invalid Fd if the listener was shut down.
Fd tcp_accept(const Fd& listener);

void send_all(const Fd& sock, std::span<const std::uint8_t> bytes);
void send_all(const Fd& sock, std::string_view text);

/// Reads exactly `n` bytes. Returns false on orderly EOF before the first
/// byte; throws NetError on errors or EOF mid-read.
bool recv_exact(const Fd& sock, std::span<std::uint8_t> out);

/// Waits until the socket is readable. False on timeout.
bool wait_readable(const Fd& sock, std::chrono::milliseconds timeout);

void set_recv_timeout(const Fd& sock, std::chrono::milliseconds timeout);

/// Disables further sends and receives so blocked readers wake up.
void shutdown_both(const Fd& sock) noexcept;

/// Buffered newline-delimited reader over a socket or pipe.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}
  /// Next line without its trailing newline; nullopt at EOF.
  std::optional<std::string> next();
  /// Whether a complete line is already buffered.
  bool has_line() const noexcept { return buffer_.find('\n') != std::string::npos; }

 private:
  int fd_;
  std::string buffer_;
  bool eof_ = false;
};

/// Polls until something accepts TCP connections on `ep` or the deadline passes.
bool wait_port_open(const Endpoint& ep, std::chrono::milliseconds timeout,
                    std::chrono::milliseconds interval = std::chrono::milliseconds(20));

/// Splits "host:port", "scheme://host:port" and bare hosts (keeping `default_port`).
Endpoint parse_endpoint(std::string_view text, std::uint16_t default_port);

}  // namespace otmcp::net
