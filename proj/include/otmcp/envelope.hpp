#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace otmcp {

using json = nlohmann::json;

/// Closed taxonomy of failure reasons carried in `error.class`.
enum class ErrorClass {
  invalid_input,
  range_overflow,
  illegal_address,
  type_mismatch,
  protocol_error,
  endpoint_unreachable,
  writes_disabled,
  timeout,
  internal,
};

std::string_view to_string(ErrorClass c) noexcept;
std::optional<ErrorClass> parse_error_class(std::string_view text) noexcept;
std::span<const ErrorClass> all_error_classes() noexcept;

struct ErrorInfo {
  ErrorClass error_class = ErrorClass::internal;
  std::string message;
  json details;  // null when absent

  bool operator==(const ErrorInfo&) const = default;
};

struct CallMeta {
  double latency_ms = 0.0;
  std::string endpoint;
  int attempts = 1;
  std::string protocol;
  std::map<std::string, std::string> trace;

  bool operator==(const CallMeta&) const = default;
};

/// The `{success, data, error, meta}` result every adapter tool returns.
///
/// Exactly one of data/error is populated. Values are immutable once built;
/// `with_meta` yields a copy carrying different call metadata.
class Envelope {
 public:
  static Envelope success(json data, CallMeta meta);
  static Envelope failure(ErrorClass error_class, std::string message, json details,
                          CallMeta meta);

  /// Parses a raw envelope object. Throws std::invalid_argument listing the
  /// violations when `validate_envelope` reports any.
  static Envelope from_json(const json& raw);
  static Envelope parse(std::string_view text);

  bool ok() const noexcept { return success_; }
  const json& data() const noexcept { return data_; }
  const std::optional<ErrorInfo>& error() const noexcept { return error_; }
  const CallMeta& meta() const noexcept { return meta_; }

  /// Error class, or nullopt on success.
  std::optional<ErrorClass> error_class() const noexcept;

  Envelope with_meta(CallMeta meta) const;

  json to_json() const;

  /// Canonical UTF-8 JSON: top-level keys in the order success, data, error,
  /// meta; nested objects with sorted keys; the absent side written as null.
  std::string serialize() const;

  bool operator==(const Envelope&) const = default;

 private:
  Envelope() = default;

  bool success_ = false;
  json data_;
  std::optional<ErrorInfo> error_;
  CallMeta meta_;
};

/// Exception carrying a taxonomy class; tool handlers turn it into an error envelope.
class Failure : public std::runtime_error {
 public:
  Failure(ErrorClass error_class, const std::string& message, json details = {})
      : std::runtime_error(message), error_class_(error_class), details_(std::move(details)) {}

  ErrorClass error_class() const noexcept { return error_class_; }
  const json& details() const noexcept { return details_; }

 private:
  ErrorClass error_class_;
  json details_;
};

/// Every violated envelope invariant in `raw`; empty means valid.
std::vector<std::string> validate_envelope(const json& raw);

json meta_to_json(const CallMeta& meta);

/// JSON dump that never throws on malformed UTF-8 (invalid bytes replaced).
std::string dump_json(const json& value);

}  // namespace otmcp
