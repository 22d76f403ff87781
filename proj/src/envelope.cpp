#include "otmcp/envelope.hpp"

#include <array>
#include <stdexcept>

namespace otmcp {

namespace {

constexpr std::array<ErrorClass, 9> kAllClasses = {
    ErrorClass::invalid_input,        ErrorClass::range_overflow,  ErrorClass::illegal_address,
    ErrorClass::type_mismatch,        ErrorClass::protocol_error,  ErrorClass::endpoint_unreachable,
    ErrorClass::writes_disabled,      ErrorClass::timeout,         ErrorClass::internal,
};

void check_meta(const CallMeta& meta) {
  if (!(meta.latency_ms >= 0.0)) throw std::invalid_argument("meta.latency_ms must be >= 0");
  if (meta.attempts < 1) throw std::invalid_argument("meta.attempts must be >= 1");
}

CallMeta meta_from_json(const json& raw) {
  CallMeta meta;
  meta.latency_ms = raw.at("latency_ms").get<double>();
  meta.endpoint = raw.value("endpoint", std::string{});
  meta.attempts = raw.at("attempts").get<int>();
  meta.protocol = raw.value("protocol", std::string{});
  if (auto it = raw.find("trace"); it != raw.end() && it->is_object()) {
    for (const auto& [k, v] : it->items()) {
      meta.trace[k] = v.is_string() ? v.get<std::string>() : dump_json(v);
    }
  }
  return meta;
}

}  // namespace

std::string_view to_string(ErrorClass c) noexcept {
  switch (c) {
    case ErrorClass::invalid_input: return "invalid_input";
    case ErrorClass::range_overflow: return "range_overflow";
    case ErrorClass::illegal_address: return "illegal_address";
    case ErrorClass::type_mismatch: return "type_mismatch";
    case ErrorClass::protocol_error: return "protocol_error";
    case ErrorClass::endpoint_unreachable: return "endpoint_unreachable";
    case ErrorClass::writes_disabled: return "writes_disabled";
    case ErrorClass::timeout: return "timeout";
    case ErrorClass::internal: return "internal";
  }
  return "internal";
}

std::optional<ErrorClass> parse_error_class(std::string_view text) noexcept {
  for (auto c : kAllClasses) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::span<const ErrorClass> all_error_classes() noexcept { return kAllClasses; }

Envelope Envelope::success(json data, CallMeta meta) {
  check_meta(meta);
  Envelope env;
  env.success_ = true;
  env.data_ = data.is_null() ? json::object() : std::move(data);
  env.meta_ = std::move(meta);
  return env;
}

Envelope Envelope::failure(ErrorClass error_class, std::string message, json details,
                           CallMeta meta) {
  if (message.empty()) throw std::invalid_argument("error message must be non-empty");
  check_meta(meta);
  Envelope env;
  env.success_ = false;
  env.error_ = ErrorInfo{error_class, std::move(message), std::move(details)};
  env.meta_ = std::move(meta);
  return env;
}

Envelope Envelope::from_json(const json& raw) {
  if (auto violations = validate_envelope(raw); !violations.empty()) {
    std::string all;
    for (const auto& v : violations) all += (all.empty() ? "" : "; ") + v;
    throw std::invalid_argument("invalid envelope: " + all);
  }
  auto meta = meta_from_json(raw.at("meta"));
  if (raw.at("success").get<bool>()) return success(raw.at("data"), std::move(meta));
  const auto& err = raw.at("error");
  return failure(*parse_error_class(err.at("class").get<std::string>()),
                 err.at("message").get<std::string>(), err.value("details", json{}),
                 std::move(meta));
}

Envelope Envelope::parse(std::string_view text) {
  json raw;
  try {
    raw = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("envelope is not JSON: ") + e.what());
  }
  return from_json(raw);
}

std::optional<ErrorClass> Envelope::error_class() const noexcept {
  if (!error_) return std::nullopt;
  return error_->error_class;
}

Envelope Envelope::with_meta(CallMeta meta) const {
  check_meta(meta);
  Envelope copy = *this;
  copy.meta_ = std::move(meta);
  return copy;
}

json meta_to_json(const CallMeta& meta) {
  json out = {
      {"latency_ms", meta.latency_ms},
      {"endpoint", meta.endpoint},
      {"attempts", meta.attempts},
      {"protocol", meta.protocol},
  };
  if (!meta.trace.empty()) out["trace"] = meta.trace;
  return out;
}

json Envelope::to_json() const {
  json out = json::object();
  out["success"] = success_;
  out["data"] = success_ ? data_ : json{};
  if (error_) {
    json err = {{"class", std::string(to_string(error_->error_class))},
                {"message", error_->message}};
    err["details"] = error_->details;
    out["error"] = std::move(err);
  } else {
    out["error"] = nullptr;
  }
  out["meta"] = meta_to_json(meta_);
  return out;
}

std::string Envelope::serialize() const {
  const json full = to_json();
  std::string text = "{\"success\":";
  text += success_ ? "true" : "false";
  text += ",\"data\":" + dump_json(full["data"]);
  text += ",\"error\":" + dump_json(full["error"]);
  text += ",\"meta\":" + dump_json(full["meta"]);
  text += '}';
  return text;
}

std::string dump_json(const json& value) {
  return value.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::vector<std::string> validate_envelope(const json& raw) {
  std::vector<std::string> out;
  if (!raw.is_object()) {
    out.emplace_back("envelope is not an object");
    return out;
  }
  for (const char* key : {"success", "data", "error", "meta"}) {
    if (!raw.contains(key)) out.push_back(std::string("missing key: ") + key);
  }
  if (!out.empty()) return out;

  const auto& success = raw["success"];
  const auto& data = raw["data"];
  const auto& error = raw["error"];
  const auto& meta = raw["meta"];

  if (!success.is_boolean()) {
    out.emplace_back("success is not a boolean");
  } else if (success.get<bool>()) {
    if (!error.is_null()) out.emplace_back("error present on success");
    if (data.is_null()) out.emplace_back("data missing on success");
  } else {
    if (!data.is_null()) out.emplace_back("data present on failure");
    if (error.is_null()) out.emplace_back("error missing on failure");
  }

  if (!error.is_null()) {
    if (!error.is_object()) {
      out.emplace_back("error is not an object");
    } else {
      auto cls = error.find("class");
      if (cls == error.end() || !cls->is_string()) {
        out.emplace_back("error.class missing");
      } else if (!parse_error_class(cls->get<std::string>())) {
        out.emplace_back("unknown error class");
      }
      auto msg = error.find("message");
      if (msg == error.end() || !msg->is_string() || msg->get<std::string>().empty()) {
        out.emplace_back("error.message missing or empty");
      }
    }
  }

  if (!meta.is_object()) {
    out.emplace_back("meta is not an object");
  } else {
    auto lat = meta.find("latency_ms");
    if (lat == meta.end() || !lat->is_number() || lat->get<double>() < 0.0) {
      out.emplace_back("meta.latency_ms missing or negative");
    }
    auto att = meta.find("attempts");
    if (att == meta.end() || !att->is_number_integer() || att->get<long long>() < 1) {
      out.emplace_back("meta.attempts missing or < 1");
    }
    for (const char* key : {"endpoint", "protocol"}) {
      auto it = meta.find(key);
      if (it == meta.end() || !it->is_string()) {
        out.push_back(std::string("meta.") + key + " missing");
      }
    }
  }
  return out;
}

}  // namespace otmcp
