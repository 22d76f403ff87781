#include "otmcp/mqtt/client.hpp"

#include <algorithm>
#include <cmath>

#include "otmcp/env.hpp"

namespace otmcp::mqtt {

double ReconnectPolicy::delay_before(int n) const {
  double d = initial_delay_s;
  for (int i = 1; i < n; ++i) d = std::min(d * multiplier, max_delay_s);
  return std::min(d, std::max(max_delay_s, initial_delay_s));
}

ReconnectPolicy ReconnectPolicy::from_env() {
  ReconnectPolicy p;
  const double initial = env::number("MQTT_RECONNECT_INITIAL_S", p.initial_delay_s);
  if (initial > 0.0 && std::isfinite(initial)) p.initial_delay_s = initial;
  return p;
}

void MessageStore::push(Message m) {
  std::lock_guard lock(mu_);
  ++received_;
  if (capacity_ == 0) {
    ++dropped_;
    return;
  }
  if (items_.size() == capacity_) {
    items_.pop_front();
    ++dropped_;
  }
  items_.push_back(std::move(m));
}

std::vector<Message> MessageStore::query(const std::optional<std::string>& filter, std::size_t limit) const {
  std::lock_guard lock(mu_);
  std::vector<Message> out;
  for (auto it = items_.rbegin(); it != items_.rend() && out.size() < limit; ++it) {
    if (!filter || topic_matches(*filter, it->topic)) out.push_back(*it);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t MessageStore::clear() {
  std::lock_guard lock(mu_);
  const auto n = items_.size();
  items_.clear();
  return n;
}

std::size_t MessageStore::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::uint64_t MessageStore::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::uint64_t MessageStore::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

struct Client::Link {
  net::Fd sock;
  std::mutex write_mu;
  std::thread reader;
  std::atomic<bool> alive{true};

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::uint16_t, std::optional<Packet>> acks;
  std::uint64_t pings_sent = 0;
  std::uint64_t pongs = 0;

  ~Link() {
    net::shutdown_both(sock);
    if (reader.joinable()) reader.join();
  }

  void kill() {
    alive = false;
    net::shutdown_both(sock);
    std::lock_guard lock(mu);
    cv.notify_all();
  }
};

Client::Client(ClientOptions options) : options_(std::move(options)), store_(options_.store_capacity) {}

Client::~Client() { stop(); }

bool Client::start() {
  std::unique_lock lock(mu_);
  if (!supervisor_.joinable()) {
    stopping_ = false;
    supervisor_ = std::thread([this] { supervise(); });
  }
  cv_.wait(lock, [this] { return first_attempt_done_ || stopping_; });
  return link_ && link_->alive;
}

void Client::stop() {
  std::shared_ptr<Link> link;
  {
    std::lock_guard lock(mu_);
    if (stopping_ && !supervisor_.joinable()) return;
    stopping_ = true;
    link = link_;
    cv_.notify_all();
  }
  if (link && link->alive) {
    try {
      send(*link, Disconnect{});
    } catch (const std::exception&) {
    }
    link->kill();
  }
  if (supervisor_.joinable()) supervisor_.join();
  std::lock_guard lock(mu_);
  link_.reset();
}

bool Client::connected() const {
  auto l = live_link();
  return static_cast<bool>(l);
}

ClientStatus Client::status() const {
  std::lock_guard lock(mu_);
  ClientStatus s = status_;
  s.connected = link_ && link_->alive;
  s.attempts_since_loss = attempts_.size();
  return s;
}

void Client::set_on_connected(std::function<void(bool)> fn) {
  std::lock_guard lock(mu_);
  on_connected_ = std::move(fn);
}

std::optional<Client::Clock::time_point> Client::last_loss() const {
  std::lock_guard lock(mu_);
  return last_loss_;
}

std::vector<Client::Clock::time_point> Client::attempts_since_loss() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

std::map<std::string, std::uint8_t> Client::subscriptions() const {
  std::lock_guard lock(mu_);
  return subscriptions_;
}

std::shared_ptr<Client::Link> Client::live_link() const {
  std::lock_guard lock(mu_);
  if (link_ && link_->alive) return link_;
  return nullptr;
}

std::uint16_t Client::next_packet_id() {
  std::lock_guard lock(id_mu_);
  if (++last_id_ == 0) last_id_ = 1;
  return last_id_;
}

void Client::unreachable(const std::string& why) const {
  throw Failure(ErrorClass::endpoint_unreachable,
                "MQTT broker " + options_.endpoint.to_string() + " unreachable: " + why,
                json{{"endpoint", options_.endpoint.to_string()}});
}

void Client::send(Link& link, const Packet& packet) {
  const auto bytes = encode_packet(packet);
  std::lock_guard lock(link.write_mu);
  try {
    net::send_all(link.sock, std::span<const std::uint8_t>(bytes));
  } catch (const net::NetError& e) {
    link.kill();
    unreachable(e.what());
  }
}

Packet Client::request(const std::shared_ptr<Link>& link, const Packet& packet, std::uint16_t packet_id) {
  {
    std::lock_guard lock(link->mu);
    link->acks[packet_id] = std::nullopt;
  }
  send(*link, packet);
  std::unique_lock lock(link->mu);
  const bool done = link->cv.wait_for(lock, options_.ack_timeout, [&] {
    return !link->alive || link->acks[packet_id].has_value();
  });
  auto node = link->acks.extract(packet_id);
  if (node && node.mapped()) return std::move(*node.mapped());
  if (!link->alive) unreachable("connection lost while waiting for acknowledgement");
  (void)done;
  throw Failure(ErrorClass::timeout, "broker did not acknowledge within " +
                                         std::to_string(options_.ack_timeout.count()) + " ms",
                json{{"packet_id", packet_id}});
}

std::vector<std::uint8_t> Client::subscribe(const std::string& filter, std::uint8_t qos) {
  auto link = live_link();
  if (!link) unreachable("not connected");
  const auto id = next_packet_id();
  Packet ack = request(link, Subscribe{id, {{filter, qos}}}, id);
  const auto* s = std::get_if<Suback>(&ack);
  if (!s) throw Failure(ErrorClass::protocol_error, "expected SUBACK");
  if (s->granted.empty() || s->granted[0] == kSubackFailure) {
    throw Failure(ErrorClass::protocol_error, "broker refused subscription to " + filter,
                  json{{"topic_filter", filter}, {"granted", s->granted}});
  }
  std::lock_guard lock(mu_);
  subscriptions_[filter] = qos;
  return s->granted;
}

void Client::unsubscribe(const std::string& filter) {
  auto link = live_link();
  if (!link) unreachable("not connected");
  const auto id = next_packet_id();
  Packet ack = request(link, Unsubscribe{id, {filter}}, id);
  if (!std::holds_alternative<Unsuback>(ack)) throw Failure(ErrorClass::protocol_error, "expected UNSUBACK");
  std::lock_guard lock(mu_);
  subscriptions_.erase(filter);
}

std::optional<std::uint16_t> Client::publish(const std::string& topic, const std::string& payload, std::uint8_t qos,
                                             bool retain) {
  auto link = live_link();
  if (!link) unreachable("not connected");
  Publish p{topic, payload, qos, retain, false, std::nullopt};
  if (qos == 0) {
    send(*link, p);
    return std::nullopt;
  }
  const auto id = next_packet_id();
  p.packet_id = id;
  Packet ack = request(link, p, id);
  if (!std::holds_alternative<Puback>(ack)) throw Failure(ErrorClass::protocol_error, "expected PUBACK");
  return id;
}

double Client::ping() {
  auto link = live_link();
  if (!link) unreachable("not connected");
  const auto t0 = Clock::now();
  std::uint64_t target;
  {
    std::lock_guard lock(link->mu);
    target = ++link->pings_sent;
  }
  send(*link, Pingreq{});
  std::unique_lock lock(link->mu);
  if (!link->cv.wait_for(lock, options_.ack_timeout, [&] { return !link->alive || link->pongs >= target; })) {
    throw Failure(ErrorClass::timeout, "no PINGRESP within " + std::to_string(options_.ack_timeout.count()) + " ms");
  }
  if (link->pongs < target) unreachable("connection lost while waiting for PINGRESP");
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::shared_ptr<Client::Link> Client::try_connect(std::string& error, std::optional<std::uint8_t>& code) {
  try {
    auto link = std::make_shared<Link>();
    link->sock = net::tcp_connect(options_.endpoint, options_.connect_timeout);
    const auto hello = encode_packet(Connect{options_.client_id, options_.keep_alive_s, true});
    net::send_all(link->sock, std::span<const std::uint8_t>(hello));
    if (!net::wait_readable(link->sock, options_.connect_timeout)) {
      error = "no CONNACK";
      return nullptr;
    }
    auto pkt = read_packet(link->sock);
    const auto* ack = pkt ? std::get_if<Connack>(&*pkt) : nullptr;
    if (!ack) {
      error = "expected CONNACK";
      return nullptr;
    }
    code = ack->return_code;
    if (ack->return_code != 0) {
      error = "connection refused with code " + std::to_string(ack->return_code);
      return nullptr;
    }
    Link* raw = link.get();
    link->reader = std::thread([this, raw] { read_loop(raw); });
    return link;
  } catch (const std::exception& e) {
    error = e.what();
    return nullptr;
  }
}

void Client::read_loop(Link* link) {
  try {
    while (link->alive) {
      auto pkt = read_packet(link->sock);
      if (!pkt) break;
      if (auto* p = std::get_if<Publish>(&*pkt)) {
        const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
        if (p->qos == 1 && p->packet_id) {
          const auto ack = encode_packet(Puback{*p->packet_id});
          std::lock_guard lock(link->write_mu);
          net::send_all(link->sock, std::span<const std::uint8_t>(ack));
        }
        store_.push(Message{p->topic, std::move(p->payload), p->qos, p->retain, now});
        continue;
      }
      std::optional<std::uint16_t> id;
      if (auto* a = std::get_if<Puback>(&*pkt)) id = a->packet_id;
      if (auto* a = std::get_if<Suback>(&*pkt)) id = a->packet_id;
      if (auto* a = std::get_if<Unsuback>(&*pkt)) id = a->packet_id;
      std::lock_guard lock(link->mu);
      if (id) {
        auto it = link->acks.find(*id);
        if (it != link->acks.end()) it->second = std::move(*pkt);
      } else if (std::holds_alternative<Pingresp>(*pkt)) {
        ++link->pongs;
      }
      link->cv.notify_all();
    }
  } catch (const std::exception&) {
  }
  link->kill();
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

void Client::restore_subscriptions(const std::shared_ptr<Link>& link) {
  std::vector<std::pair<std::string, std::uint8_t>> filters;
  {
    std::lock_guard lock(mu_);
    filters.assign(subscriptions_.begin(), subscriptions_.end());
  }
  if (filters.empty()) return;
  const auto id = next_packet_id();
  try {
    request(link, Subscribe{id, filters}, id);
  } catch (const Failure&) {
    link->kill();
  }
}

void Client::supervise() {
  std::unique_lock lock(mu_);
  auto next_attempt = Clock::now();
  int failures = 0;
  bool first = true;
  while (!stopping_) {
    if (cv_.wait_until(lock, next_attempt, [this] { return stopping_; })) break;
    if (last_loss_) attempts_.push_back(Clock::now());
    lock.unlock();

    std::string error;
    std::optional<std::uint8_t> code;
    auto link = try_connect(error, code);

    lock.lock();
    if (code) status_.connack_code = code;
    if (!link) {
      status_.last_error = error;
      ++failures;
      next_attempt = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                        std::chrono::duration<double>(options_.policy.delay_before(failures + 1)));
      if (!first_attempt_done_) {
        first_attempt_done_ = true;
        // The first failure starts the policy clock as if a loss had happened.
        last_loss_ = Clock::now();
        attempts_.clear();
        failures = 0;
        next_attempt = *last_loss_ + std::chrono::duration_cast<Clock::duration>(
                                         std::chrono::duration<double>(options_.policy.delay_before(1)));
      }
      cv_.notify_all();
      continue;
    }

    if (stopping_) {
      link->kill();
      break;
    }
    link_ = link;
    ++status_.connects;
    status_.last_error.clear();
    failures = 0;
    auto callback = on_connected_;
    lock.unlock();
    restore_subscriptions(link);
    if (callback && link->alive) callback(first);
    lock.lock();
    first = false;
    first_attempt_done_ = true;
    cv_.notify_all();

    cv_.wait(lock, [&] { return stopping_ || !link->alive; });
    if (stopping_) break;
    ++status_.losses;
    last_loss_ = Clock::now();
    attempts_.clear();
    link_.reset();
    lock.unlock();
    link.reset();  // joins the reader
    lock.lock();
    next_attempt = *last_loss_ + std::chrono::duration_cast<Clock::duration>(
                                     std::chrono::duration<double>(options_.policy.delay_before(1)));
  }
  first_attempt_done_ = true;
  cv_.notify_all();
}

}  // namespace otmcp::mqtt
