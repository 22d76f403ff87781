#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "otmcp/envelope.hpp"

namespace otmcp::ua {

struct NodeId {
  std::uint16_t ns = 0;
  std::variant<std::uint32_t, std::string> id;

  bool operator==(const NodeId&) const = default;
  auto operator<=>(const NodeId&) const = default;
};

/// "ns={n};i={num}" or "ns={n};s={str}"; a missing "ns=" prefix means
/// namespace 0. Throws Failure(invalid_input) when malformed.
NodeId parse_node_id(std::string_view text);
std::string render(const NodeId& id);

/// Root of the plant hierarchy (the standard Objects folder).
inline const NodeId kRootNode{0, std::uint32_t{85}};
/// Server status variable probed before each operation.
inline const NodeId kServerStatusNode{0, std::uint32_t{2256}};
inline constexpr std::uint16_t kPlantNamespace = 2;

enum class NodeClass { Object, Variable, Method };
enum class DataType { Float, Double, Boolean, Int32, String };

std::string_view to_string(NodeClass c) noexcept;
std::string_view to_string(DataType t) noexcept;
std::optional<NodeClass> parse_node_class(std::string_view text) noexcept;
std::optional<DataType> parse_datatype(std::string_view text) noexcept;

struct NodeInfo {
  NodeId node_id;
  std::string browse_name;
  NodeClass node_class = NodeClass::Object;
  std::optional<DataType> datatype;  // set iff node_class is Variable
  bool readable = false;
  bool writable = false;

  bool operator==(const NodeInfo&) const = default;
};

json to_json(const NodeInfo& n);
/// Throws Failure(protocol_error) on a malformed object.
NodeInfo node_info_from_json(const json& j);

/// Whether `value` is a valid JSON representation of `t`.
bool value_fits(DataType t, const json& value);

}  // namespace otmcp::ua
