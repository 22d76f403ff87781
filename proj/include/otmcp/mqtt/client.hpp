#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "otmcp/mqtt/codec.hpp"
#include "otmcp/net.hpp"

namespace otmcp::mqtt {

struct ReconnectPolicy {
  double initial_delay_s = 1.0;
  double multiplier = 2.0;
  double max_delay_s = 8.0;

  /// Delay before reconnect attempt `n` (1-based), counted from the loss for
  /// n = 1 and from the previous failed attempt otherwise.
  double delay_before(int n) const;

  /// Defaults, with MQTT_RECONNECT_INITIAL_S overriding the initial delay.
  static ReconnectPolicy from_env();
};

struct Message {
  std::string topic;
  std::string payload;
  std::uint8_t qos = 0;
  bool retain = false;
  std::int64_t received_at_ms = 0;  // unix epoch
};

/// Bounded FIFO of received messages; the oldest entry is dropped when full.
class MessageStore {
 public:
  explicit MessageStore(std::size_t capacity = 1024) : capacity_(capacity) {}

  void push(Message m);
  /// Oldest first; at most `limit` of the newest matching entries.
  std::vector<Message> query(const std::optional<std::string>& filter, std::size_t limit) const;
  std::size_t clear();
  std::size_t size() const;
  std::uint64_t dropped() const;
  std::uint64_t received() const;
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<Message> items_;
  std::uint64_t dropped_ = 0;
  std::uint64_t received_ = 0;
};

struct ClientOptions {
  net::Endpoint endpoint{"127.0.0.1", 1883};
  std::string client_id = "otmcp";
  std::uint16_t keep_alive_s = 60;
  ReconnectPolicy policy;
  std::chrono::milliseconds connect_timeout{1000};
  std::chrono::milliseconds ack_timeout{2000};
  std::size_t store_capacity = 1024;
};

struct ClientStatus {
  bool connected = false;
  std::optional<std::uint8_t> connack_code;
  std::uint64_t connects = 0;
  std::uint64_t losses = 0;
  std::size_t attempts_since_loss = 0;
  std::string last_error;
};

/// MQTT 3.1.1 client. A supervisor thread owns connection setup: the first
/// attempt happens on start(), and after an unexpected loss attempts follow
/// the reconnect policy. Subscriptions are restored on every reconnect.
/// Operations fail fast with endpoint_unreachable while disconnected.
class Client {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Client(ClientOptions options);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  /// Starts the supervisor and waits for the first connection attempt.
  /// Returns whether it succeeded; on failure reconnects continue.
  bool start();
  /// Sends DISCONNECT when connected and stops all threads.
  void stop();

  bool connected() const;
  ClientStatus status() const;
  const ClientOptions& options() const noexcept { return options_; }

  /// Returns the granted qos codes. Throws Failure (endpoint_unreachable,
  /// timeout, protocol_error when the broker refuses).
  std::vector<std::uint8_t> subscribe(const std::string& filter, std::uint8_t qos);
  void unsubscribe(const std::string& filter);
  /// qos 1 waits for PUBACK. Returns the packet id for qos 1.
  std::optional<std::uint16_t> publish(const std::string& topic, const std::string& payload, std::uint8_t qos,
                                       bool retain);
  /// PINGREQ/PINGRESP round trip in milliseconds.
  double ping();

  std::map<std::string, std::uint8_t> subscriptions() const;
  MessageStore& messages() noexcept { return store_; }

  /// Runs on the supervisor thread after each (re)connect, once
  /// subscriptions are restored. `first` is true for the first connection.
  void set_on_connected(std::function<void(bool first)> fn);

  /// Steady-clock times of the last loss and of every attempt since then.
  std::optional<Clock::time_point> last_loss() const;
  std::vector<Clock::time_point> attempts_since_loss() const;

 private:
  struct Link;

  void supervise();
  std::shared_ptr<Link> try_connect(std::string& error, std::optional<std::uint8_t>& code);
  void read_loop(Link* link);
  std::shared_ptr<Link> live_link() const;
  std::uint16_t next_packet_id();
  /// Sends `packet` and waits for the ack with `packet_id`.
  Packet request(const std::shared_ptr<Link>& link, const Packet& packet, std::uint16_t packet_id);
  void send(Link& link, const Packet& packet);
  void restore_subscriptions(const std::shared_ptr<Link>& link);
  [[noreturn]] void unreachable(const std::string& why) const;

  ClientOptions options_;
  MessageStore store_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::shared_ptr<Link> link_;
  bool stopping_ = false;
  bool first_attempt_done_ = false;
  std::thread supervisor_;
  std::map<std::string, std::uint8_t> subscriptions_;
  std::function<void(bool)> on_connected_;
  ClientStatus status_;
  std::optional<Clock::time_point> last_loss_;
  std::vector<Clock::time_point> attempts_;

  std::mutex id_mu_;
  std::uint16_t last_id_ = 0;
};

}  // namespace otmcp::mqtt
