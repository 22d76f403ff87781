#include "otmcp/modbus/client.hpp"

#include <array>

namespace otmcp::modbus {

namespace {

struct Timeout : net::NetError {
  using net::NetError::NetError;
};

}  // namespace

Client::Client(ClientOptions options) : options_(std::move(options)) {}

Pdu Client::exchange_locked(const std::vector<std::uint8_t>& frame, std::uint16_t txn, std::uint8_t fc) {
  net::send_all(sock_, std::span<const std::uint8_t>(frame));
  std::array<std::uint8_t, 260> buf{};
  for (;;) {
    if (!net::wait_readable(sock_, options_.response_timeout)) throw Timeout("no response within timeout");
    std::span<std::uint8_t> header(buf.data(), kMbapHeaderSize);
    if (!net::recv_exact(sock_, header)) throw net::NetError("connection closed by peer");
    const std::size_t body = body_length_from_header(header);
    if (!net::recv_exact(sock_, std::span<std::uint8_t>(buf.data() + kMbapHeaderSize, body))) {
      throw net::NetError("connection closed mid-frame");
    }
    Adu adu = decode_adu(std::span<const std::uint8_t>(buf.data(), kMbapHeaderSize + body), Direction::response);
    if (adu.transaction_id != txn) continue;  // late answer to an abandoned request
    if ((function_of(adu.pdu) & 0x7F) != fc) {
      throw Failure(ErrorClass::protocol_error, "response function does not match request",
                    json{{"expected", fc}, {"received", function_of(adu.pdu)}});
    }
    return adu.pdu;
  }
}

Client::Reply Client::transact(const Pdu& request) {
  std::lock_guard lock(mu_);
  const std::uint16_t txn = next_txn_++;
  if (next_txn_ == 0) next_txn_ = 1;
  const auto frame = encode_adu(Adu{txn, options_.unit_id, request});
  const std::uint8_t fc = function_of(request);

  std::string last;
  bool timed_out = false;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    try {
      if (!sock_) {
        sock_ = net::tcp_connect(options_.endpoint, options_.connect_timeout);
        ++status_.connects;
        if (status_.connects > 1) ++status_.reconnects;
      }
      Pdu pdu = exchange_locked(frame, txn, fc);
      ++status_.transactions;
      status_.last_error.clear();
      return Reply{std::move(pdu), attempt};
    } catch (const Timeout& e) {
      timed_out = true;
      last = e.what();
    } catch (const net::NetError& e) {
      timed_out = false;
      last = e.what();
    } catch (const Failure&) {
      sock_.reset();
      throw;
    }
    sock_.reset();
  }
  status_.last_error = last;
  const json details{{"endpoint", options_.endpoint.to_string()}, {"attempts", 2}, {"cause", last}};
  if (timed_out) throw Failure(ErrorClass::timeout, "Modbus device did not answer: " + last, details);
  throw Failure(ErrorClass::endpoint_unreachable,
                "Modbus endpoint " + options_.endpoint.to_string() + " unreachable: " + last, details);
}

ClientStatus Client::status() const {
  std::lock_guard lock(mu_);
  ClientStatus s = status_;
  s.connected = static_cast<bool>(sock_);
  return s;
}

void Client::disconnect() {
  std::lock_guard lock(mu_);
  sock_.reset();
}

Failure exception_failure(const ExceptionResponse& e) {
  const std::string name(exception_name(e.code));
  return Failure(ErrorClass::protocol_error, "device returned exception " + name,
                 json{{"function", e.function}, {"code", e.code}, {"exception", name}});
}

}  // namespace otmcp::modbus
