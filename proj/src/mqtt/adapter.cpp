#include "otmcp/mqtt/adapter.hpp"

#include <cmath>
#include <iostream>
#include <unistd.h>

#include "otmcp/env.hpp"

namespace otmcp::mqtt {

namespace {

namespace args = mcp::args;
namespace sp = sparkplug;
using mcp::ArgError;
using mcp::CallScope;

constexpr std::string_view kProtocol = "mqtt";
constexpr std::size_t kDefaultMessageLimit = 50;

std::uint64_t now_ms() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

void raise(const std::optional<ErrorInfo>& err) {
  if (err) throw Failure(err->error_class, err->message, err->details);
}

std::int64_t arg_qos(const json& a) { return args::opt_int(a, "qos").value_or(0); }

std::string hex(std::string_view bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0x0F]);
  }
  return out;
}

std::string unhex(const std::string& text) {
  if (text.size() % 2 != 0) throw ArgError("payload_hex must have an even number of digits");
  std::string out;
  for (std::size_t i = 0; i < text.size(); i += 2) {
    std::size_t used = 0;
    int byte = 0;
    try {
      byte = std::stoi(text.substr(i, 2), &used, 16);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != 2) throw ArgError("payload_hex holds a non-hex digit near offset " + std::to_string(i));
    out.push_back(static_cast<char>(byte));
  }
  return out;
}

bool is_utf8(const std::string& s) {
  try {
    (void)json(s).dump(-1, ' ', false, json::error_handler_t::strict);
    return true;
  } catch (const json::type_error&) {
    return false;
  }
}

json message_to_json(const Message& m) {
  json j{{"topic", m.topic}, {"qos", m.qos}, {"retain", m.retain}, {"bytes", m.payload.size()},
         {"received_at_ms", m.received_at_ms}};
  if (is_utf8(m.payload)) {
    j["payload"] = m.payload;
  } else {
    j["payload_hex"] = hex(m.payload);
  }
  if (auto topic = sp::parse_topic(m.topic)) {
    try {
      const auto* data = reinterpret_cast<const std::uint8_t*>(m.payload.data());
      j["sparkplug"] = sp::payload_to_json(sp::decode_payload(std::span(data, m.payload.size())));
      j["sparkplug"]["message_type"] = sp::to_string(topic->type);
    } catch (const Failure&) {
      j["sparkplug_error"] = "payload is not a valid Sparkplug B payload";
    }
  }
  return j;
}

std::vector<sp::Metric> arg_metrics(const json& a, bool required) {
  if (!a.contains("metrics")) {
    if (required) throw ArgError("missing required argument: metrics");
    return {};
  }
  const auto& list = args::get_array(a, "metrics");
  if (required && list.empty()) throw ArgError("metrics must hold at least one metric");
  std::vector<sp::Metric> out;
  for (const auto& m : list) out.push_back(sp::metric_from_json(m));
  return out;
}

std::string arg_device(const json& a) {
  if (auto d = args::opt_string(a, "device_id")) return *d;
  if (auto d = args::opt_string(a, "device")) return *d;
  throw ArgError("missing required argument: device_id");
}

json metrics_prop() {
  return {{"type", "array"},
          {"description",
           "Metrics as {name, datatype, value} or shorthand {name, float: 25.0}; datatypes Int32, Int64, UInt64, "
           "Float, Double, Boolean, String"},
          {"items", {{"type", "object"}}}};
}

json device_prop() { return {{"type", "string"}, {"description", "Sparkplug device id"}}; }

json qos_prop() { return {{"type", "integer"}, {"enum", {0, 1}}, {"default", 0}}; }

}  // namespace

AdapterConfig config_from_env() {
  AdapterConfig cfg;
  cfg.client.endpoint.host = env::get_or("MQTT_HOST", "127.0.0.1");
  const double port = env::number("MQTT_PORT", 1883);
  if (port < 1 || port > 65535 || port != std::floor(port)) {
    throw std::invalid_argument("MQTT_PORT must be an integer in 1..65535");
  }
  cfg.client.endpoint.port = static_cast<std::uint16_t>(port);
  cfg.client.client_id = env::get_or("MQTT_CLIENT_ID", "otmcp-mqtt-" + std::to_string(::getpid()));
  cfg.client.policy = ReconnectPolicy::from_env();
  cfg.group_id = env::get_or("SPARKPLUG_GROUP_ID", sp::Defaults::group_id);
  cfg.edge_node_id = env::get_or("SPARKPLUG_EDGE_NODE_ID", sp::Defaults::edge_node_id);
  return cfg;
}

Adapter::Adapter(AdapterConfig config)
    : config_(std::move(config)),
      client_(config_.client),
      registry_(std::string(kProtocol), [this] { return endpoint_uri(); }) {
  client_.set_on_connected([this](bool) {
    std::lock_guard lock(sp_mu_);
    born_ = false;
  });
  register_tools();
  client_.start();
}

Adapter::~Adapter() { client_.stop(); }

std::string Adapter::endpoint_uri() const { return "mqtt://" + config_.client.endpoint.to_string(); }

std::size_t Adapter::publish_raw(const sp::Topic& topic, const sp::Payload& payload) {
  const auto bytes = sp::encode_payload(payload);
  client_.publish(sp::render_topic(topic), std::string(bytes.begin(), bytes.end()), 0, false);
  return bytes.size();
}

Adapter::SpResult Adapter::sp_publish(sp::MessageType type, const std::string& edge_node_id,
                                      const std::optional<std::string>& device_id, std::vector<sp::Metric> metrics) {
  using sp::MessageType;
  const sp::Topic topic{config_.group_id, type, edge_node_id, device_id};
  const auto rendered = sp::render_topic(topic);
  if (!client_.connected()) {
    throw Failure(ErrorClass::endpoint_unreachable,
                  "MQTT broker " + config_.client.endpoint.to_string() + " unreachable: not connected",
                  json{{"endpoint", config_.client.endpoint.to_string()}});
  }

  std::lock_guard lock(sp_mu_);
  SpResult result{rendered, std::nullopt, 0, false};
  const auto ts = now_ms();
  auto bd_metric = [this] { return sp::Metric{"bdSeq", std::nullopt, std::nullopt, sp::MetricValue{bd_seq_}}; };
  auto birth = [&](std::vector<sp::Metric> extra) {
    if (ever_born_) ++bd_seq_;
    std::vector<sp::Metric> all{bd_metric()};
    for (auto& m : extra) all.push_back(std::move(m));
    const sp::Payload p{ts, std::move(all), seq_.birth()};
    const auto n = publish_raw({config_.group_id, MessageType::NBIRTH, config_.edge_node_id, std::nullopt}, p);
    born_ = true;
    ever_born_ = true;
    return n;
  };

  switch (type) {
    case MessageType::NBIRTH:
      result.bytes = birth(std::move(metrics));
      result.seq = 0;
      return result;
    case MessageType::NDEATH: {
      metrics.insert(metrics.begin(), bd_metric());
      result.bytes = publish_raw(topic, sp::Payload{ts, std::move(metrics), std::nullopt});
      born_ = false;
      return result;
    }
    case MessageType::NCMD:
    case MessageType::DCMD:
      result.bytes = publish_raw(topic, sp::Payload{ts, std::move(metrics), std::nullopt});
      return result;
    default:
      break;
  }
  if (!born_) {
    birth({});
    result.auto_nbirth = true;
  }
  const sp::Payload p{ts, std::move(metrics), seq_.next()};
  result.seq = p.seq;
  result.bytes = publish_raw(topic, p);
  return result;
}

void Adapter::register_tools() {
  auto guarded = [this](auto body) {
    return [this, body](const json& a) -> Envelope {
      CallScope scope(std::string(kProtocol), endpoint_uri());
      try {
        return scope.ok(body(scope, a));
      } catch (const Failure& f) {
        return scope.fail(f.error_class(), f.what(), f.details());
      } catch (const ArgError& e) {
        return scope.fail(ErrorClass::invalid_input, e.what());
      }
    };
  };

  auto add = [this](std::string name, std::string description, json schema, mcp::ToolHandler handler) {
    registry_.add({std::move(name), std::move(description), std::move(schema)}, std::move(handler));
  };

  auto sp_json = [](const SpResult& r, sp::MessageType type) {
    return json{{"topic", r.topic},
                {"message_type", sp::to_string(type)},
                {"seq", r.seq ? json(*r.seq) : json(nullptr)},
                {"bytes", r.bytes},
                {"auto_nbirth", r.auto_nbirth}};
  };

  // --- broker ---------------------------------------------------------------
  add("broker_info", "Inspect broker connectivity with a PINGREQ round trip.", mcp::object_schema(json::object()),
      guarded([this](CallScope&, const json&) {
        const double rtt = client_.ping();
        const auto st = client_.status();
        return json{{"connected", st.connected},
                    {"endpoint", endpoint_uri()},
                    {"client_id", config_.client.client_id},
                    {"protocol", "MQTT 3.1.1"},
                    {"broker_returns_connack_code", st.connack_code ? json(*st.connack_code) : json(nullptr)},
                    {"subscriptions_count", client_.subscriptions().size()},
                    {"round_trip_ms", rtt}};
      }));

  add("connection_status", "Report the client connection state and reconnect policy.",
      mcp::object_schema(json::object()), guarded([this](CallScope&, const json&) {
        const auto st = client_.status();
        const auto& policy = config_.client.policy;
        return json{{"connected", st.connected},
                    {"endpoint", endpoint_uri()},
                    {"client_id", config_.client.client_id},
                    {"connects", st.connects},
                    {"connection_losses", st.losses},
                    {"attempts_since_loss", st.attempts_since_loss},
                    {"last_error", st.last_error.empty() ? json(nullptr) : json(st.last_error)},
                    {"reconnect_policy",
                     {{"initial_delay_s", policy.initial_delay_s},
                      {"multiplier", policy.multiplier},
                      {"max_delay_s", policy.max_delay_s}}},
                    {"messages_buffered", client_.messages().size()}};
      }));

  // --- generic MQTT ---------------------------------------------------------
  add("subscribe", "Subscribe to a topic filter; received messages are buffered for get_messages.",
      mcp::object_schema({{"topic_filter", {{"type", "string"}}}, {"qos", qos_prop()}}, {"topic_filter"}),
      guarded([this](CallScope&, const json& a) {
        const auto filter = args::get_string(a, "topic_filter");
        const auto qos = arg_qos(a);
        raise(validate_subscribe(filter, qos));
        const auto granted = client_.subscribe(filter, static_cast<std::uint8_t>(qos));
        return json{{"topic_filter", filter}, {"granted_qos", granted}};
      }));

  add("unsubscribe", "Remove a subscription.",
      mcp::object_schema({{"topic_filter", {{"type", "string"}}}}, {"topic_filter"}),
      guarded([this](CallScope&, const json& a) {
        const auto filter = args::get_string(a, "topic_filter");
        if (auto why = filter_problem(filter)) throw ArgError(*why);
        const bool was = client_.subscriptions().count(filter) > 0;
        client_.unsubscribe(filter);
        return json{{"topic_filter", filter}, {"was_subscribed", was}};
      }));

  add("list_subscriptions", "List active subscriptions.", mcp::object_schema(json::object()),
      guarded([this](CallScope&, const json&) {
        json list = json::array();
        for (const auto& [f, q] : client_.subscriptions()) list.push_back({{"topic_filter", f}, {"qos", q}});
        return json{{"subscriptions", list}, {"count", list.size()}};
      }));

  add("publish", "Publish a message. Give payload as text or payload_hex for binary data.",
      mcp::object_schema({{"topic", {{"type", "string"}}},
                          {"payload", {{"type", "string"}}},
                          {"payload_hex", {{"type", "string"}}},
                          {"qos", qos_prop()},
                          {"retain", {{"type", "boolean"}, {"default", false}}}},
                         {"topic"}),
      guarded([this](CallScope&, const json& a) {
        const auto topic = args::get_string(a, "topic");
        const auto qos = arg_qos(a);
        raise(validate_publish(topic, qos));
        const auto text = args::opt_string(a, "payload");
        const auto hex_text = args::opt_string(a, "payload_hex");
        if (text && hex_text) throw ArgError("give either payload or payload_hex, not both");
        const std::string payload = hex_text ? unhex(*hex_text) : text.value_or("");
        const bool retain = args::opt_bool(a, "retain").value_or(false);
        const auto id = client_.publish(topic, payload, static_cast<std::uint8_t>(qos), retain);
        json out{{"topic", topic}, {"bytes", payload.size()}, {"qos", qos}, {"retain", retain}};
        if (id) out["packet_id"] = *id;
        return out;
      }));

  add("get_messages", "Return buffered messages, oldest first, optionally filtered by a topic filter.",
      mcp::object_schema({{"filter", {{"type", "string"}}},
                          {"limit", {{"type", "integer"}, {"minimum", 1}, {"maximum", 1024}, {"default", 50}}}}),
      guarded([this](CallScope&, const json& a) {
        const auto filter = args::opt_string(a, "filter");
        if (filter) {
          if (auto why = filter_problem(*filter)) throw ArgError(*why);
        }
        const auto limit = args::opt_int(a, "limit").value_or(kDefaultMessageLimit);
        if (limit < 1 || limit > 1024) throw ArgError("limit must be within 1..1024");
        json list = json::array();
        auto& store = client_.messages();
        for (const auto& m : store.query(filter, static_cast<std::size_t>(limit))) list.push_back(message_to_json(m));
        return json{{"messages", list},
                    {"count", list.size()},
                    {"buffered", store.size()},
                    {"dropped", store.dropped()},
                    {"capacity", store.capacity()}};
      }));

  add("clear_messages", "Discard all buffered messages.", mcp::object_schema(json::object()),
      guarded([this](CallScope&, const json&) { return json{{"cleared", client_.messages().clear()}}; }));

  // --- Sparkplug B ------------------------------------------------------------
  using sp::MessageType;
  add("sp_publish_nbirth", "Publish an edge-node NBIRTH (seq 0 with bdSeq) starting a new Sparkplug session.",
      mcp::object_schema({{"metrics", metrics_prop()}}), guarded([this, sp_json](CallScope&, const json& a) {
        auto r = sp_publish(MessageType::NBIRTH, config_.edge_node_id, std::nullopt, arg_metrics(a, false));
        return sp_json(r, MessageType::NBIRTH);
      }));

  add("sp_publish_ndeath", "Publish an edge-node NDEATH carrying the session bdSeq.", mcp::object_schema(json::object()),
      guarded([this, sp_json](CallScope&, const json&) {
        auto r = sp_publish(MessageType::NDEATH, config_.edge_node_id, std::nullopt, {});
        return sp_json(r, MessageType::NDEATH);
      }));

  add("sp_publish_dbirth", "Publish a device DBIRTH with its metric set.",
      mcp::object_schema({{"device_id", device_prop()}, {"metrics", metrics_prop()}}, {"device_id"}),
      guarded([this, sp_json](CallScope&, const json& a) {
        auto r = sp_publish(MessageType::DBIRTH, config_.edge_node_id, arg_device(a), arg_metrics(a, false));
        return sp_json(r, MessageType::DBIRTH);
      }));

  add("sp_publish_ddeath", "Publish a device DDEATH.", mcp::object_schema({{"device_id", device_prop()}}, {"device_id"}),
      guarded([this, sp_json](CallScope&, const json& a) {
        auto r = sp_publish(MessageType::DDEATH, config_.edge_node_id, arg_device(a), {});
        return sp_json(r, MessageType::DDEATH);
      }));

  add("sp_publish_ddata", "Publish device metric values as Sparkplug B DDATA.",
      mcp::object_schema({{"device_id", device_prop()}, {"metrics", metrics_prop()}}, {"device_id", "metrics"}),
      guarded([this, sp_json](CallScope&, const json& a) {
        auto r = sp_publish(MessageType::DDATA, config_.edge_node_id, arg_device(a), arg_metrics(a, true));
        return sp_json(r, MessageType::DDATA);
      }));

  add("sp_publish_ncmd", "Send an NCMD to an edge node.",
      mcp::object_schema({{"edge_node_id", {{"type", "string"}}}, {"metrics", metrics_prop()}}, {"metrics"}),
      guarded([this, sp_json](CallScope&, const json& a) {
        const auto edge = args::opt_string(a, "edge_node_id").value_or(config_.edge_node_id);
        auto r = sp_publish(MessageType::NCMD, edge, std::nullopt, arg_metrics(a, true));
        return sp_json(r, MessageType::NCMD);
      }));

  add("sp_publish_dcmd", "Send a DCMD to a device.",
      mcp::object_schema(
          {{"edge_node_id", {{"type", "string"}}}, {"device_id", device_prop()}, {"metrics", metrics_prop()}},
          {"device_id", "metrics"}),
      guarded([this, sp_json](CallScope&, const json& a) {
        const auto edge = args::opt_string(a, "edge_node_id").value_or(config_.edge_node_id);
        auto r = sp_publish(MessageType::DCMD, edge, arg_device(a), arg_metrics(a, true));
        return sp_json(r, MessageType::DCMD);
      }));
}

int run_stdio_server() {
  std::unique_ptr<Adapter> adapter;
  try {
    adapter = std::make_unique<Adapter>(config_from_env());
  } catch (const std::exception& e) {
    std::cerr << "mqtt adapter: " << e.what() << '\n';
    return 2;
  }
  mcp::serve(adapter->registry(), mcp::ServerInfo{"otmcp-mqtt"}, STDIN_FILENO, STDOUT_FILENO);
  return 0;
}

}  // namespace otmcp::mqtt
