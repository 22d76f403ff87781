#include "otmcp/ua/model.hpp"

#include <charconv>
#include <cmath>
#include <limits>

namespace otmcp::ua {

namespace {

[[noreturn]] void bad_id(std::string_view text, const std::string& why) {
  throw Failure(ErrorClass::invalid_input, "malformed node id '" + std::string(text) + "': " + why,
                json{{"node_id", text}});
}

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

NodeId parse_node_id(std::string_view text) {
  NodeId out;
  std::string_view rest = text;
  if (rest.starts_with("ns=")) {
    const auto semi = rest.find(';');
    if (semi == std::string_view::npos) bad_id(text, "expected ';' after the namespace");
    const auto ns = parse_uint<std::uint16_t>(rest.substr(3, semi - 3));
    if (!ns) bad_id(text, "namespace must be an integer in 0..65535");
    out.ns = *ns;
    rest = rest.substr(semi + 1);
  }
  if (rest.starts_with("i=")) {
    const auto num = parse_uint<std::uint32_t>(rest.substr(2));
    if (!num) bad_id(text, "numeric identifier must be an unsigned 32-bit integer");
    out.id = *num;
  } else if (rest.starts_with("s=")) {
    if (rest.size() == 2) bad_id(text, "string identifier must be non-empty");
    out.id = std::string(rest.substr(2));
  } else {
    bad_id(text, "expected 'i=' or 's=' identifier");
  }
  return out;
}

std::string render(const NodeId& id) {
  std::string out = "ns=" + std::to_string(id.ns) + ";";
  if (const auto* n = std::get_if<std::uint32_t>(&id.id)) return out + "i=" + std::to_string(*n);
  return out + "s=" + std::get<std::string>(id.id);
}

std::string_view to_string(NodeClass c) noexcept {
  switch (c) {
    case NodeClass::Object:
      return "Object";
    case NodeClass::Variable:
      return "Variable";
    case NodeClass::Method:
      return "Method";
  }
  return "Object";
}

std::string_view to_string(DataType t) noexcept {
  switch (t) {
    case DataType::Float:
      return "Float";
    case DataType::Double:
      return "Double";
    case DataType::Boolean:
      return "Boolean";
    case DataType::Int32:
      return "Int32";
    case DataType::String:
      return "String";
  }
  return "String";
}

std::optional<NodeClass> parse_node_class(std::string_view text) noexcept {
  for (auto c : {NodeClass::Object, NodeClass::Variable, NodeClass::Method}) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

std::optional<DataType> parse_datatype(std::string_view text) noexcept {
  for (auto t : {DataType::Float, DataType::Double, DataType::Boolean, DataType::Int32, DataType::String}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

json to_json(const NodeInfo& n) {
  return json{{"node_id", render(n.node_id)},
              {"browse_name", n.browse_name},
              {"node_class", to_string(n.node_class)},
              {"datatype", n.datatype ? json(to_string(*n.datatype)) : json(nullptr)},
              {"access", {{"readable", n.readable}, {"writable", n.writable}}}};
}

NodeInfo node_info_from_json(const json& j) {
  try {
    NodeInfo n;
    n.node_id = parse_node_id(j.at("node_id").get<std::string>());
    n.browse_name = j.at("browse_name").get<std::string>();
    const auto cls = parse_node_class(j.at("node_class").get<std::string>());
    if (!cls) throw Failure(ErrorClass::protocol_error, "unknown node class");
    n.node_class = *cls;
    if (j.contains("datatype") && !j["datatype"].is_null()) {
      n.datatype = parse_datatype(j["datatype"].get<std::string>());
      if (!n.datatype) throw Failure(ErrorClass::protocol_error, "unknown datatype");
    }
    n.readable = j.at("access").at("readable").get<bool>();
    n.writable = j.at("access").at("writable").get<bool>();
    return n;
  } catch (const json::exception& e) {
    throw Failure(ErrorClass::protocol_error, std::string("malformed node description: ") + e.what());
  } catch (const Failure& f) {
    throw Failure(ErrorClass::protocol_error, std::string("malformed node description: ") + f.what());
  }
}

bool value_fits(DataType t, const json& value) {
  switch (t) {
    case DataType::Float:
      return value.is_number() && std::fabs(value.get<double>()) <= std::numeric_limits<float>::max();
    case DataType::Double:
      return value.is_number();
    case DataType::Boolean:
      return value.is_boolean();
    case DataType::Int32:
      if (value.is_number_unsigned()) return value.get<std::uint64_t>() <= INT32_MAX;
      return value.is_number_integer() && value.get<std::int64_t>() >= INT32_MIN &&
             value.get<std::int64_t>() <= INT32_MAX;
    case DataType::String:
      return value.is_string();
  }
  return false;
}

}  // namespace otmcp::ua
