#include "otmcp/ua/client.hpp"

namespace otmcp::ua {

namespace {

struct Timeout : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

Client::Client(ClientOptions options) : options_(std::move(options)) {}

Client::~Client() { disconnect(); }

void Client::drop_locked(const std::string& why) {
  if (!why.empty()) status_.last_error = why;
  reader_.reset();
  sock_.reset();
  status_.connected = false;
}

json Client::exchange_locked(const std::string& op, const json& params) {
  const auto id = next_id_++;
  net::send_all(sock_, json{{"id", id}, {"op", op}, {"params", params}}.dump() + "\n");
  if (!reader_->has_line() && !net::wait_readable(sock_, options_.response_timeout)) {
    throw Timeout("no response to '" + op + "' within " + std::to_string(options_.response_timeout.count()) + " ms");
  }
  auto line = reader_->next();
  if (!line) throw net::NetError("connection closed by server");
  json response;
  try {
    response = json::parse(*line);
  } catch (const json::parse_error&) {
    drop_locked("malformed response");
    throw Failure(ErrorClass::protocol_error, "malformed response from server", json{{"op", op}});
  }
  if (!response.is_object() || response.value("id", json()) != json(id) || !response.contains("ok") ||
      !response["ok"].is_boolean()) {
    drop_locked("mismatched response");
    throw Failure(ErrorClass::protocol_error, "response does not match request", json{{"op", op}});
  }
  if (response["ok"].get<bool>()) return response.value("result", json());
  const json error = response.value("error", json::object());
  const auto cls = parse_error_class(error.value("class", std::string("protocol_error")));
  throw Failure(cls.value_or(ErrorClass::protocol_error), error.value("message", std::string("operation failed")),
                error.value("details", json()));
}

Client::Reply Client::request(const std::string& op, const json& params) {
  std::lock_guard lock(mu_);
  ++status_.requests;
  const int max_attempts = 1 + std::max(0, options_.liveness.reconnect_retries);
  std::string last;
  bool timed_out = false;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    try {
      if (!sock_) {
        sock_ = net::tcp_connect(options_.endpoint, options_.connect_timeout);
        net::set_recv_timeout(sock_, options_.response_timeout);
        reader_ = std::make_unique<net::LineReader>(sock_.get());
        if (status_.connects++ > 0) ++status_.reconnects;
        status_.connected = true;
      }
      if (options_.liveness.probe_before_each_op) {
        ++status_.probes;
        exchange_locked("read", json{{"node_id", render(options_.liveness.status_node)}});
      }
      return Reply{exchange_locked(op, params), attempt};
    } catch (const Timeout& e) {
      timed_out = true;
      last = e.what();
      drop_locked(last);
    } catch (const net::NetError& e) {
      timed_out = false;
      last = e.what();
      drop_locked(last);
    }
  }
  const json details{{"endpoint", options_.endpoint.to_string()}, {"attempts", max_attempts}, {"cause", last}};
  if (timed_out) throw Failure(ErrorClass::timeout, "node-model server did not answer: " + last, details);
  throw Failure(ErrorClass::endpoint_unreachable, "node-model server unreachable at " + options_.endpoint.to_string() +
                                                      ": " + last,
                details);
}

ClientStatus Client::status() const {
  std::lock_guard lock(mu_);
  return status_;
}

void Client::disconnect() {
  std::lock_guard lock(mu_);
  drop_locked("");
}

}  // namespace otmcp::ua
