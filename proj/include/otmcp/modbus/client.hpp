#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>

#include "otmcp/modbus/codec.hpp"
#include "otmcp/net.hpp"

namespace otmcp::modbus {

struct ClientOptions {
  net::Endpoint endpoint{"127.0.0.1", 1502};
  std::uint8_t unit_id = 1;
  std::chrono::milliseconds connect_timeout{1000};
  std::chrono::milliseconds response_timeout{2000};
};

struct ClientStatus {
  bool connected = false;
  std::uint64_t connects = 0;
  std::uint64_t reconnects = 0;
  std::uint64_t transactions = 0;
  std::string last_error;
};

/// One TCP connection, one request in flight at a time. A transport failure
/// drops the socket and the request is retried once on a fresh connection.
class Client {
 public:
  explicit Client(ClientOptions options);

  struct Reply {
    Pdu pdu;
    int attempts = 1;
  };

  /// Sends `request` and returns the matching response PDU. Exception
  /// responses are returned as-is. Throws Failure: invalid_input if the
  /// request cannot be encoded (nothing is sent), endpoint_unreachable or
  /// timeout after the retry, protocol_error for a malformed or mismatched
  /// response.
  Reply transact(const Pdu& request);

  ClientStatus status() const;
  void disconnect();
  const ClientOptions& options() const noexcept { return options_; }

 private:
  Pdu exchange_locked(const std::vector<std::uint8_t>& frame, std::uint16_t txn, std::uint8_t fc);

  ClientOptions options_;
  mutable std::mutex mu_;
  net::Fd sock_;
  std::uint16_t next_txn_ = 1;
  ClientStatus status_;
};

/// Failure for an exception response: protocol_error with details
/// {function, code, exception}.
Failure exception_failure(const ExceptionResponse& e);

}  // namespace otmcp::modbus
