#include "otmcp/mqtt/broker.hpp"

#include <algorithm>
#include <vector>

namespace otmcp::mqtt {

struct Broker::Session {
  std::string client_id;
  const net::Fd* fd = nullptr;
  std::mutex write_mu;
  std::map<std::string, std::uint8_t> subs;  // guarded by Broker::mu_
  std::uint16_t last_id = 0;                 // guarded by write_mu
  bool closed = false;                       // guarded by write_mu

  void close() {
    std::lock_guard lock(write_mu);
    if (!closed) net::shutdown_both(*fd);
  }
};

Broker::Broker(net::Endpoint bind) : server_(std::move(bind), [this](const net::Fd& c) { serve(c); }) {}

Broker::~Broker() { stop(); }

void Broker::start() { server_.start(); }

void Broker::stop() {
  server_.stop();
  std::lock_guard lock(mu_);
  sessions_.clear();
}

std::size_t Broker::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::size_t Broker::retained_count() const {
  std::lock_guard lock(mu_);
  return retained_.size();
}

std::map<std::string, std::uint8_t> Broker::subscriptions_of(const std::string& client_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(client_id);
  if (it == sessions_.end()) return {};
  return it->second->subs;
}

void Broker::serve(const net::Fd& conn) {
  std::shared_ptr<Session> session;
  try {
    auto first = read_packet(conn);
    auto* hello = first ? std::get_if<Connect>(&*first) : nullptr;
    if (!hello) return;
    session = std::make_shared<Session>();
    session->fd = &conn;
    session->client_id = hello->client_id;
    {
      std::lock_guard lock(mu_);
      if (session->client_id.empty()) session->client_id = "otmcp-anon-" + std::to_string(++anonymous_);
      auto superseded = std::exchange(sessions_[session->client_id], session);
      if (superseded) superseded->close();
    }
    {
      const auto ack = encode_packet(Connack{false, 0});
      std::lock_guard lock(session->write_mu);
      net::send_all(conn, std::span<const std::uint8_t>(ack));
    }
    for (;;) {
      auto packet = read_packet(conn);
      if (!packet || std::holds_alternative<Disconnect>(*packet)) break;
      handle(session, *packet);
    }
  } catch (const std::exception&) {
  }
  if (session) {
    {
      std::lock_guard lock(session->write_mu);
      session->closed = true;
    }
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session->client_id);
    if (it != sessions_.end() && it->second == session) sessions_.erase(it);
  }
}

void Broker::handle(const std::shared_ptr<Session>& s, Packet& packet) {
  auto reply = [&](const Packet& p) {
    const auto bytes = encode_packet(p);
    std::lock_guard lock(s->write_mu);
    if (s->closed) return;
    net::send_all(*s->fd, std::span<const std::uint8_t>(bytes));
  };
  if (auto* p = std::get_if<Publish>(&packet)) {
    if (topic_problem(p->topic)) throw Failure(ErrorClass::protocol_error, "invalid publish topic");
    if (p->qos == 1) reply(Puback{*p->packet_id});
    if (p->retain) {
      std::lock_guard lock(mu_);
      if (p->payload.empty()) {
        retained_.erase(p->topic);
      } else {
        retained_[p->topic] = *p;
      }
    }
    route(*p);
    return;
  }
  if (auto* sub = std::get_if<Subscribe>(&packet)) {
    Suback ack{sub->packet_id, {}};
    std::vector<std::pair<Publish, std::uint8_t>> replay;
    {
      std::lock_guard lock(mu_);
      for (const auto& [filter, qos] : sub->filters) {
        if (filter_problem(filter)) {
          ack.granted.push_back(kSubackFailure);
          continue;
        }
        const auto granted = std::min<std::uint8_t>(qos, 1);
        s->subs[filter] = granted;
        ack.granted.push_back(granted);
        for (const auto& [topic, msg] : retained_) {
          if (topic_matches(filter, topic)) replay.emplace_back(msg, std::min(msg.qos, granted));
        }
      }
    }
    reply(ack);
    for (const auto& [msg, qos] : replay) deliver(*s, msg, qos, true);
    return;
  }
  if (auto* unsub = std::get_if<Unsubscribe>(&packet)) {
    {
      std::lock_guard lock(mu_);
      for (const auto& f : unsub->filters) s->subs.erase(f);
    }
    reply(Unsuback{unsub->packet_id});
    return;
  }
  if (std::holds_alternative<Pingreq>(packet)) {
    reply(Pingresp{});
    return;
  }
  if (std::holds_alternative<Puback>(packet)) return;
  throw Failure(ErrorClass::protocol_error, "unexpected packet from client");
}

void Broker::route(const Publish& p) {
  std::vector<std::pair<std::shared_ptr<Session>, std::uint8_t>> targets;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, s] : sessions_) {
      int best = -1;
      for (const auto& [filter, qos] : s->subs) {
        if (topic_matches(filter, p.topic)) best = std::max<int>(best, qos);
      }
      if (best >= 0) targets.emplace_back(s, std::min<std::uint8_t>(p.qos, static_cast<std::uint8_t>(best)));
    }
  }
  for (const auto& [s, qos] : targets) {
    try {
      deliver(*s, p, qos, false);
    } catch (const std::exception&) {
      s->close();
    }
  }
}

void Broker::deliver(Session& s, const Publish& p, std::uint8_t qos, bool retain) {
  Publish out{p.topic, p.payload, qos, retain, false, std::nullopt};
  std::lock_guard lock(s.write_mu);
  if (s.closed) return;
  if (qos == 1) {
    if (++s.last_id == 0) s.last_id = 1;
    out.packet_id = s.last_id;
  }
  const auto bytes = encode_packet(out);
  net::send_all(*s.fd, std::span<const std::uint8_t>(bytes));
}

}  // namespace otmcp::mqtt
