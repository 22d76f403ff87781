#include "otmcp/sparkplug/sparkplug.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <limits>

namespace otmcp::sparkplug {

namespace {

enum WireType : std::uint8_t { kVarint = 0, kFixed64 = 1, kLengthDelimited = 2, kFixed32 = 5 };

[[noreturn]] void malformed(const std::string& what) {
  throw Failure(ErrorClass::protocol_error, "malformed Sparkplug payload: " + what);
}

void put_tag(std::vector<std::uint8_t>& out, std::uint32_t field, WireType wt) {
  append_varint(out, (static_cast<std::uint64_t>(field) << 3) | wt);
}

void put_fixed(std::vector<std::uint8_t>& out, std::uint64_t bits, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, std::uint32_t field, std::span<const std::uint8_t> data) {
  put_tag(out, field, kLengthDelimited);
  append_varint(out, data.size());
  out.insert(out.end(), data.begin(), data.end());
}

std::vector<std::uint8_t> encode_metric(const Metric& m) {
  std::vector<std::uint8_t> out;
  const std::string& name = m.name;
  put_bytes(out, 1, std::span(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()));
  if (m.alias) {
    put_tag(out, 2, kVarint);
    append_varint(out, *m.alias);
  }
  if (m.timestamp_ms) {
    put_tag(out, 3, kVarint);
    append_varint(out, *m.timestamp_ms);
  }
  put_tag(out, 4, kVarint);
  append_varint(out, static_cast<std::uint32_t>(m.datatype()));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::int32_t>) {
          put_tag(out, 10, kVarint);
          append_varint(out, static_cast<std::uint32_t>(v));
        } else if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, std::uint64_t>) {
          put_tag(out, 11, kVarint);
          append_varint(out, static_cast<std::uint64_t>(v));
        } else if constexpr (std::is_same_v<T, float>) {
          put_tag(out, 12, kFixed32);
          put_fixed(out, std::bit_cast<std::uint32_t>(v), 4);
        } else if constexpr (std::is_same_v<T, double>) {
          put_tag(out, 13, kFixed64);
          put_fixed(out, std::bit_cast<std::uint64_t>(v), 8);
        } else if constexpr (std::is_same_v<T, bool>) {
          put_tag(out, 14, kVarint);
          append_varint(out, v ? 1 : 0);
        } else {
          put_bytes(out, 15, std::span(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()));
        }
      },
      m.value);
  return out;
}

struct Field {
  std::uint32_t number = 0;
  WireType type = kVarint;
  std::uint64_t scalar = 0;              // varint / fixed
  std::span<const std::uint8_t> bytes;  // length-delimited
};

Field read_field(std::span<const std::uint8_t> b, std::size_t& pos) {
  const auto key = read_varint(b, pos);
  Field f;
  f.number = static_cast<std::uint32_t>(key >> 3);
  if (f.number == 0) malformed("field number 0");
  const auto wt = static_cast<std::uint8_t>(key & 7);
  auto fixed = [&](int n) {
    if (pos + n > b.size()) malformed("truncated fixed field");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += n;
    return v;
  };
  switch (wt) {
    case kVarint:
      f.type = kVarint;
      f.scalar = read_varint(b, pos);
      break;
    case kFixed64:
      f.type = kFixed64;
      f.scalar = fixed(8);
      break;
    case kFixed32:
      f.type = kFixed32;
      f.scalar = fixed(4);
      break;
    case kLengthDelimited: {
      f.type = kLengthDelimited;
      const auto n = read_varint(b, pos);
      if (n > b.size() - pos) malformed("length-delimited field past end");
      f.bytes = b.subspan(pos, n);
      pos += n;
      break;
    }
    default:
      malformed("unsupported wire type " + std::to_string(wt));
  }
  return f;
}

void expect(const Field& f, WireType wt) {
  if (f.type != wt) malformed("field " + std::to_string(f.number) + " has the wrong wire type");
}

Metric decode_metric(std::span<const std::uint8_t> b) {
  Metric m;
  std::optional<std::uint32_t> datatype;
  std::optional<Field> value;
  bool has_name = false;
  std::size_t pos = 0;
  while (pos < b.size()) {
    Field f = read_field(b, pos);
    switch (f.number) {
      case 1:
        expect(f, kLengthDelimited);
        m.name.assign(reinterpret_cast<const char*>(f.bytes.data()), f.bytes.size());
        has_name = true;
        break;
      case 2: expect(f, kVarint); m.alias = f.scalar; break;
      case 3: expect(f, kVarint); m.timestamp_ms = f.scalar; break;
      case 4: expect(f, kVarint); datatype = static_cast<std::uint32_t>(f.scalar); break;
      case 10: case 11: case 12: case 13: case 14: case 15: value = f; break;
      default: break;
    }
  }
  if (!has_name) malformed("metric without a name");
  if (!value) malformed("metric " + m.name + " without a value");
  const Field& v = *value;
  const auto dt = datatype.value_or(0);
  switch (v.number) {
    case 10:
      expect(v, kVarint);
      m.value = static_cast<std::int32_t>(static_cast<std::uint32_t>(v.scalar));
      break;
    case 11:
      expect(v, kVarint);
      if (dt == static_cast<std::uint32_t>(DataType::UInt64)) {
        m.value = v.scalar;
      } else {
        m.value = static_cast<std::int64_t>(v.scalar);
      }
      break;
    case 12: expect(v, kFixed32); m.value = std::bit_cast<float>(static_cast<std::uint32_t>(v.scalar)); break;
    case 13: expect(v, kFixed64); m.value = std::bit_cast<double>(v.scalar); break;
    case 14: expect(v, kVarint); m.value = v.scalar != 0; break;
    case 15:
      expect(v, kLengthDelimited);
      m.value = std::string(reinterpret_cast<const char*>(v.bytes.data()), v.bytes.size());
      break;
  }
  if (datatype && *datatype != static_cast<std::uint32_t>(m.datatype())) {
    malformed("metric " + m.name + " datatype does not match its value field");
  }
  return m;
}

[[noreturn]] void mismatch(std::string_view name, DataType t, const json& v) {
  throw Failure(ErrorClass::type_mismatch,
                "metric " + std::string(name) + ": value " + dump_json(v) + " is not a valid " + std::string(to_string(t)),
                json{{"metric", name}, {"datatype", to_string(t)}, {"value", v}});
}

template <typename I>
I integral(std::string_view name, DataType t, const json& v) {
  if (v.is_number_integer()) {
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<I>::max())) mismatch(name, t, v);
      return static_cast<I>(u);
    }
    const auto s = v.get<std::int64_t>();
    if constexpr (std::is_unsigned_v<I>) {
      if (s < 0) mismatch(name, t, v);
      return static_cast<I>(s);
    } else {
      if (s < std::numeric_limits<I>::min() || s > std::numeric_limits<I>::max()) mismatch(name, t, v);
      return static_cast<I>(s);
    }
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && d >= static_cast<double>(std::numeric_limits<I>::min()) &&
        d <= static_cast<double>(std::numeric_limits<I>::max())) {
      return static_cast<I>(d);
    }
  }
  mismatch(name, t, v);
}

MetricValue coerce(std::string_view name, DataType t, const json& v) {
  switch (t) {
    case DataType::Int32: return integral<std::int32_t>(name, t, v);
    case DataType::Int64: return integral<std::int64_t>(name, t, v);
    case DataType::UInt64: return integral<std::uint64_t>(name, t, v);
    case DataType::Float:
      if (!v.is_number()) mismatch(name, t, v);
      if (std::fabs(v.get<double>()) > std::numeric_limits<float>::max()) mismatch(name, t, v);
      return static_cast<float>(v.get<double>());
    case DataType::Double:
      if (!v.is_number()) mismatch(name, t, v);
      return v.get<double>();
    case DataType::Boolean:
      if (!v.is_boolean()) mismatch(name, t, v);
      return v.get<bool>();
    case DataType::String:
      if (!v.is_string()) mismatch(name, t, v);
      return v.get<std::string>();
  }
  mismatch(name, t, v);
}

bool bad_segment(std::string_view s) {
  return s.empty() || s.find_first_of("/+#") != std::string_view::npos;
}

}  // namespace

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::NBIRTH: return "NBIRTH";
    case MessageType::NDEATH: return "NDEATH";
    case MessageType::DBIRTH: return "DBIRTH";
    case MessageType::DDEATH: return "DDEATH";
    case MessageType::NDATA: return "NDATA";
    case MessageType::DDATA: return "DDATA";
    case MessageType::NCMD: return "NCMD";
    case MessageType::DCMD: return "DCMD";
  }
  return "NDATA";
}

std::optional<MessageType> parse_message_type(std::string_view text) noexcept {
  for (auto t : {MessageType::NBIRTH, MessageType::NDEATH, MessageType::DBIRTH, MessageType::DDEATH,
                 MessageType::NDATA, MessageType::DDATA, MessageType::NCMD, MessageType::DCMD}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

bool is_device_message(MessageType t) noexcept {
  return t == MessageType::DBIRTH || t == MessageType::DDEATH || t == MessageType::DDATA || t == MessageType::DCMD;
}

std::string render_topic(const Topic& t) {
  auto fail = [&](const std::string& why) -> void {
    throw Failure(ErrorClass::invalid_input, why,
                  json{{"group_id", t.group_id},
                       {"message_type", to_string(t.type)},
                       {"edge_node_id", t.edge_node_id},
                       {"device_id", t.device_id ? json(*t.device_id) : json(nullptr)}});
  };
  if (bad_segment(t.group_id)) fail("group_id must be non-empty and free of '/', '+', '#'");
  if (bad_segment(t.edge_node_id)) fail("edge_node_id must be non-empty and free of '/', '+', '#'");
  if (is_device_message(t.type)) {
    if (!t.device_id) fail(std::string(to_string(t.type)) + " requires a device_id");
    if (bad_segment(*t.device_id)) fail("device_id must be non-empty and free of '/', '+', '#'");
  } else if (t.device_id) {
    fail(std::string(to_string(t.type)) + " must not carry a device_id");
  }
  std::string out(kNamespace);
  out += '/' + t.group_id + '/' + std::string(to_string(t.type)) + '/' + t.edge_node_id;
  if (t.device_id) out += '/' + *t.device_id;
  return out;
}

std::optional<Topic> parse_topic(std::string_view topic) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto end = topic.find('/', start);
    parts.emplace_back(topic.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  if (parts.size() < 4 || parts.size() > 5 || parts[0] != kNamespace) return std::nullopt;
  auto type = parse_message_type(parts[2]);
  if (!type) return std::nullopt;
  Topic t{parts[1], *type, parts[3], std::nullopt};
  if (parts.size() == 5) t.device_id = parts[4];
  if (is_device_message(*type) != t.device_id.has_value()) return std::nullopt;
  for (const auto& p : parts) {
    if (bad_segment(p)) return std::nullopt;
  }
  return t;
}

std::string_view to_string(DataType t) noexcept {
  switch (t) {
    case DataType::Int32: return "Int32";
    case DataType::Int64: return "Int64";
    case DataType::UInt64: return "UInt64";
    case DataType::Float: return "Float";
    case DataType::Double: return "Double";
    case DataType::Boolean: return "Boolean";
    case DataType::String: return "String";
  }
  return "String";
}

std::optional<DataType> parse_datatype(std::string_view text) noexcept {
  for (auto t : {DataType::Int32, DataType::Int64, DataType::UInt64, DataType::Float, DataType::Double,
                 DataType::Boolean, DataType::String}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

DataType datatype_of(const MetricValue& v) noexcept {
  switch (v.index()) {
    case 0: return DataType::Int32;
    case 1: return DataType::Int64;
    case 2: return DataType::UInt64;
    case 3: return DataType::Float;
    case 4: return DataType::Double;
    case 5: return DataType::Boolean;
    default: return DataType::String;
  }
}

void append_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t read_varint(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= bytes.size()) malformed("truncated varint");
    const auto b = bytes[pos++];
    if (shift == 63 && (b & 0x7E)) malformed("varint overflows 64 bits");
    v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
    if ((b & 0x80) == 0) return v;
  }
  malformed("varint longer than 10 bytes");
}

std::vector<std::uint8_t> encode_payload(const Payload& p) {
  std::vector<std::uint8_t> out;
  if (p.timestamp_ms) {
    put_tag(out, 1, kVarint);
    append_varint(out, *p.timestamp_ms);
  }
  for (const auto& m : p.metrics) put_bytes(out, 2, encode_metric(m));
  if (p.seq) {
    put_tag(out, 3, kVarint);
    append_varint(out, *p.seq);
  }
  return out;
}

Payload decode_payload(std::span<const std::uint8_t> bytes) {
  Payload p;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    Field f = read_field(bytes, pos);
    switch (f.number) {
      case 1: expect(f, kVarint); p.timestamp_ms = f.scalar; break;
      case 2: expect(f, kLengthDelimited); p.metrics.push_back(decode_metric(f.bytes)); break;
      case 3: expect(f, kVarint); p.seq = f.scalar; break;
      default: break;
    }
  }
  return p;
}

json metric_to_json(const Metric& m) {
  json j{{"name", m.name}, {"datatype", to_string(m.datatype())}};
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, float>) {
          j["value"] = static_cast<double>(v);
        } else {
          j["value"] = v;
        }
      },
      m.value);
  if (m.alias) j["alias"] = *m.alias;
  if (m.timestamp_ms) j["timestamp"] = *m.timestamp_ms;
  return j;
}

json payload_to_json(const Payload& p) {
  json metrics = json::array();
  for (const auto& m : p.metrics) metrics.push_back(metric_to_json(m));
  return json{{"timestamp", p.timestamp_ms ? json(*p.timestamp_ms) : json(nullptr)},
              {"seq", p.seq ? json(*p.seq) : json(nullptr)},
              {"metrics", metrics}};
}

Metric metric_from_json(const json& j) {
  auto invalid = [&](const std::string& why) -> void {
    throw Failure(ErrorClass::invalid_input, why, json{{"metric", j}});
  };
  if (!j.is_object()) invalid("each metric must be an object");
  if (!j.contains("name") || !j.at("name").is_string() || j.at("name").get<std::string>().empty()) {
    invalid("metric needs a non-empty string name");
  }
  Metric m;
  m.name = j.at("name").get<std::string>();
  if (j.contains("alias")) {
    if (!j.at("alias").is_number_unsigned()) invalid("metric alias must be a non-negative integer");
    m.alias = j.at("alias").get<std::uint64_t>();
  }
  if (j.contains("timestamp")) {
    if (!j.at("timestamp").is_number_unsigned()) invalid("metric timestamp must be a non-negative integer");
    m.timestamp_ms = j.at("timestamp").get<std::uint64_t>();
  }

  static const std::array<std::pair<const char*, DataType>, 7> shorthand{{{"int32", DataType::Int32},
                                                                          {"int64", DataType::Int64},
                                                                          {"uint64", DataType::UInt64},
                                                                          {"float", DataType::Float},
                                                                          {"double", DataType::Double},
                                                                          {"boolean", DataType::Boolean},
                                                                          {"string", DataType::String}}};
  std::optional<std::pair<DataType, json>> chosen;
  for (const auto& [key, type] : shorthand) {
    if (j.contains(key)) {
      if (chosen) invalid("metric " + m.name + " sets more than one value");
      chosen.emplace(type, j.at(key));
    }
  }
  if (j.contains("value")) {
    if (chosen) invalid("metric " + m.name + " sets more than one value");
    const json& v = j.at("value");
    std::string type_name;
    if (j.contains("datatype")) {
      if (!j.at("datatype").is_string()) invalid("datatype must be a string");
      type_name = j.at("datatype").get<std::string>();
    } else if (j.contains("type")) {
      if (!j.at("type").is_string()) invalid("type must be a string");
      type_name = j.at("type").get<std::string>();
    }
    DataType t;
    if (!type_name.empty()) {
      auto parsed = parse_datatype(type_name);
      if (!parsed) invalid("unknown datatype: " + type_name);
      t = *parsed;
    } else if (v.is_boolean()) {
      t = DataType::Boolean;
    } else if (v.is_number_integer()) {
      t = DataType::Int64;
    } else if (v.is_number_float()) {
      t = DataType::Double;
    } else if (v.is_string()) {
      t = DataType::String;
    } else {
      invalid("metric " + m.name + " value must be a scalar");
      t = DataType::String;
    }
    chosen.emplace(t, v);
  }
  if (!chosen) invalid("metric " + m.name + " has no value");
  m.value = coerce(m.name, chosen->first, chosen->second);
  return m;
}

}  // namespace otmcp::sparkplug
