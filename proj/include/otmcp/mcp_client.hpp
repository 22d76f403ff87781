#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "otmcp/envelope.hpp"
#include "otmcp/process.hpp"

namespace otmcp::mcp {

struct LaunchSpec {
  std::vector<std::string> argv;
  std::map<std::string, std::string> env;
  std::string stderr_path;  // empty: inherit
  bool batch_scheduling = false;
};

/// Session-level failure (spawn, initialize, use after close), kept distinct
/// from tool failures which always arrive as envelopes.
class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CallResult {
  Envelope envelope;
  double harness_latency_ms = 0.0;
  std::chrono::steady_clock::time_point started;
  std::chrono::steady_clock::time_point finished;
};

/// Client side of a stdio MCP server running as a child process. Calls may be
/// issued concurrently from several threads; responses are matched by id.
class Session {
 public:
  static std::unique_ptr<Session> open(const LaunchSpec& launch,
                                       std::chrono::milliseconds init_timeout = std::chrono::seconds(5));
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  struct Reply {
    bool broken = false;
    json message;
    std::chrono::steady_clock::time_point received;
  };

  /// A tools/call request that has been written but not yet collected.
  struct InFlight {
    std::int64_t id = 0;
    std::string tool;
    std::chrono::steady_clock::time_point started;
    std::future<Reply> reply;
  };

  CallResult call(const std::string& tool, const json& arguments,
                  std::chrono::milliseconds timeout = std::chrono::seconds(5));

  /// Split form of call(): begin() writes the request and returns at once so
  /// several requests can be in flight before any is collected. The finish
  /// timestamp is the moment the reply was read off the pipe.
  InFlight begin(const std::string& tool, const json& arguments);
  CallResult finish(InFlight pending, std::chrono::milliseconds timeout = std::chrono::seconds(5));

  /// Raw JSON-RPC request; returns `result` or throws SessionError carrying the error.
  json request(const std::string& method, const json& params,
               std::chrono::milliseconds timeout = std::chrono::seconds(5));

  json list_tools(std::chrono::milliseconds timeout = std::chrono::seconds(5));
  const json& server_info() const noexcept { return server_info_; }

  bool is_open() const noexcept { return open_.load(); }
  /// Closes stdin, waits briefly for exit, then kills.
  void close();

 private:
  explicit Session(const LaunchSpec& launch);

  std::future<Reply> send(std::int64_t id, const json& message);
  void read_loop();
  void fail_pending();

  LaunchSpec launch_;
  ChildProcess child_;
  std::thread reader_;
  std::mutex write_mu_;
  std::mutex pending_mu_;
  std::map<std::int64_t, std::promise<Reply>> pending_;
  std::atomic<std::int64_t> next_id_{1};
  std::atomic<bool> open_{false};
  std::atomic<bool> broken_{false};
  json server_info_;
};

}  // namespace otmcp::mcp
