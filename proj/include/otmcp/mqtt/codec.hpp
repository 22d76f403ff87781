#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "otmcp/envelope.hpp"
#include "otmcp/net.hpp"

namespace otmcp::mqtt {

inline constexpr std::uint32_t kMaxRemainingLength = 268'435'455;

enum class PacketType : std::uint8_t {
  connect = 1,
  connack = 2,
  publish = 3,
  puback = 4,
  subscribe = 8,
  suback = 9,
  unsubscribe = 10,
  unsuback = 11,
  pingreq = 12,
  pingresp = 13,
  disconnect = 14,
};

struct Connect {
  std::string client_id;
  std::uint16_t keep_alive_s = 30;
  bool clean_session = true;
  bool operator==(const Connect&) const = default;
};

struct Connack {
  bool session_present = false;
  std::uint8_t return_code = 0;
  bool operator==(const Connack&) const = default;
};

struct Publish {
  std::string topic;
  std::string payload;  // raw bytes
  std::uint8_t qos = 0;
  bool retain = false;
  bool dup = false;
  std::optional<std::uint16_t> packet_id;  // present iff qos > 0
  bool operator==(const Publish&) const = default;
};

struct Puback {
  std::uint16_t packet_id = 0;
  bool operator==(const Puback&) const = default;
};

struct Subscribe {
  std::uint16_t packet_id = 0;
  std::vector<std::pair<std::string, std::uint8_t>> filters;
  bool operator==(const Subscribe&) const = default;
};

inline constexpr std::uint8_t kSubackFailure = 0x80;

struct Suback {
  std::uint16_t packet_id = 0;
  std::vector<std::uint8_t> granted;
  bool operator==(const Suback&) const = default;
};

struct Unsubscribe {
  std::uint16_t packet_id = 0;
  std::vector<std::string> filters;
  bool operator==(const Unsubscribe&) const = default;
};

struct Unsuback {
  std::uint16_t packet_id = 0;
  bool operator==(const Unsuback&) const = default;
};

struct Pingreq {
  bool operator==(const Pingreq&) const = default;
};
struct Pingresp {
  bool operator==(const Pingresp&) const = default;
};
struct Disconnect {
  bool operator==(const Disconnect&) const = default;
};

using Packet = std::variant<Connect, Connack, Publish, Puback, Subscribe, Suback, Unsubscribe, Unsuback, Pingreq,
                            Pingresp, Disconnect>;

PacketType type_of(const Packet& p) noexcept;

/// Variable-length "remaining length" field, 1 to 4 bytes.
std::vector<std::uint8_t> encode_remaining_length(std::uint32_t n);
/// Decodes from the start of `bytes`; returns (value, bytes consumed).
/// Throws Failure(protocol_error) when malformed or incomplete.
std::pair<std::uint32_t, std::size_t> decode_remaining_length(std::span<const std::uint8_t> bytes);

/// Throws Failure(invalid_input) when the packet breaks the subset rules.
std::vector<std::uint8_t> encode_packet(const Packet& p);
/// Decodes one complete packet (fixed header included) that spans all of `bytes`.
/// Throws Failure(protocol_error).
Packet decode_packet(std::span<const std::uint8_t> bytes);

/// Blocking read of one packet. nullopt on clean EOF before the first byte;
/// throws net::NetError on transport failure and Failure on malformed data.
std::optional<Packet> read_packet(const net::Fd& sock, std::uint32_t max_remaining = 1u << 20);

/// MQTT wildcard matching; topics starting with '$' never match a filter
/// whose first level is a wildcard.
bool topic_matches(std::string_view filter, std::string_view topic) noexcept;

/// Reason text when `filter` is not a valid subscription filter.
std::optional<std::string> filter_problem(std::string_view filter);
/// Reason text when `topic` is not a valid publish topic name.
std::optional<std::string> topic_problem(std::string_view topic);

/// Tool-level checks; errors carry class invalid_input.
std::optional<ErrorInfo> validate_publish(std::string_view topic, std::int64_t qos);
std::optional<ErrorInfo> validate_subscribe(std::string_view filter, std::int64_t qos);

}  // namespace otmcp::mqtt
