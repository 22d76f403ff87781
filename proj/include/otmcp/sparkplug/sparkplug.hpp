#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "otmcp/envelope.hpp"

namespace otmcp::sparkplug {

inline constexpr std::string_view kNamespace = "spBv1.0";

struct Defaults {
  static constexpr std::string_view group_id = "mock-plant";
  static constexpr std::string_view edge_node_id = "edge-node-1";
  static constexpr std::string_view device_1 = "device-1";
  static constexpr std::string_view device_2 = "device-2";
};

enum class MessageType { NBIRTH, NDEATH, DBIRTH, DDEATH, NDATA, DDATA, NCMD, DCMD };

std::string_view to_string(MessageType t) noexcept;
std::optional<MessageType> parse_message_type(std::string_view text) noexcept;
bool is_device_message(MessageType t) noexcept;

struct Topic {
  std::string group_id;
  MessageType type = MessageType::NDATA;
  std::string edge_node_id;
  std::optional<std::string> device_id;
  bool operator==(const Topic&) const = default;
};

/// "spBv1.0/{group}/{type}/{edge}[/{device}]". Throws Failure(invalid_input)
/// when a segment is empty or holds '/', '+' or '#', or when the device id
/// presence does not match the message type.
std::string render_topic(const Topic& t);
std::optional<Topic> parse_topic(std::string_view topic);

/// Sparkplug B DataType enum values.
enum class DataType : std::uint32_t {
  Int32 = 3,
  Int64 = 4,
  UInt64 = 8,
  Float = 9,
  Double = 10,
  Boolean = 11,
  String = 12,
};

std::string_view to_string(DataType t) noexcept;
std::optional<DataType> parse_datatype(std::string_view text) noexcept;

using MetricValue = std::variant<std::int32_t, std::int64_t, std::uint64_t, float, double, bool, std::string>;

DataType datatype_of(const MetricValue& v) noexcept;

struct Metric {
  std::string name;
  std::optional<std::uint64_t> alias;
  std::optional<std::uint64_t> timestamp_ms;
  MetricValue value;

  DataType datatype() const noexcept { return datatype_of(value); }
  bool operator==(const Metric&) const = default;
};

struct Payload {
  std::optional<std::uint64_t> timestamp_ms;
  std::vector<Metric> metrics;
  std::optional<std::uint64_t> seq;
  bool operator==(const Payload&) const = default;
};

/// Protocol Buffers wire format: Payload{timestamp=1, metrics=2, seq=3},
/// Metric{name=1, alias=2, timestamp=3, datatype=4, int_value=10,
/// long_value=11, float_value=12, double_value=13, boolean_value=14,
/// string_value=15}.
std::vector<std::uint8_t> encode_payload(const Payload& p);
/// Unknown fields are skipped. Throws Failure(protocol_error) on malformed
/// input or a metric without a value.
Payload decode_payload(std::span<const std::uint8_t> bytes);

void append_varint(std::vector<std::uint8_t>& out, std::uint64_t v);
/// Reads a varint at `pos` and advances it. Throws Failure(protocol_error).
std::uint64_t read_varint(std::span<const std::uint8_t> bytes, std::size_t& pos);

/// Node-scoped sequence numbers: NBIRTH takes 0, later messages count up
/// modulo 256.
class SeqCounter {
 public:
  std::uint8_t birth() noexcept {
    next_ = 1;
    return 0;
  }
  std::uint8_t next() noexcept { return next_++; }
  std::uint8_t peek() const noexcept { return next_; }

 private:
  std::uint8_t next_ = 0;
};

/// JSON form {name, datatype, value[, alias][, timestamp]}.
json metric_to_json(const Metric& m);
json payload_to_json(const Payload& p);

/// Accepts {name, datatype|type, value} or the shorthand {name, float: 25.0}
/// (keys int32, int64, uint64, float, double, boolean, string). Without a
/// datatype the value's JSON kind decides. Throws Failure(invalid_input) for
/// structural problems and Failure(type_mismatch) when the value does not fit
/// the datatype.
Metric metric_from_json(const json& j);

}  // namespace otmcp::sparkplug
