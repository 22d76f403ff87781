#include "otmcp/ua/mock.hpp"

#include <cstdio>

namespace otmcp::ua {

namespace {

[[noreturn]] void unknown_node(const NodeId& id) {
  throw Failure(ErrorClass::illegal_address, "node " + render(id) + " does not exist", json{{"node_id", render(id)}});
}

[[noreturn]] void rejected(const NodeId& id, std::string_view reason, const std::string& message) {
  throw Failure(ErrorClass::protocol_error, message, json{{"node_id", render(id)}, {"reason", reason}});
}

NodeInfo variable(NodeId id, std::string name, DataType t, bool writable) {
  return NodeInfo{std::move(id), std::move(name), NodeClass::Variable, t, true, writable};
}

NodeInfo object(NodeId id, std::string name) {
  return NodeInfo{std::move(id), std::move(name), NodeClass::Object, std::nullopt, true, false};
}

NodeInfo method(NodeId id, std::string name) {
  return NodeInfo{std::move(id), std::move(name), NodeClass::Method, std::nullopt, false, false};
}

json method_arg(const json& args, std::size_t index, std::string_view key) {
  if (args.is_array() && args.size() > index) return args[index];
  if (args.is_object() && args.contains(key)) return args[std::string(key)];
  return nullptr;
}

}  // namespace

AddressSpace::AddressSpace(plant::Constants constants)
    : constants_(constants), started_(std::chrono::steady_clock::now()) {
  nodes_[kRootNode] = Node{object(kRootNode, "Objects"), {}, {}, {}, {}};
  nodes_[kServerStatusNode] = Node{variable(kServerStatusNode, "ServerStatus", DataType::String, false),
                                   {},
                                   [] { return json("running"); },
                                   {},
                                   {}};

  add(kRootNode, {object(plant_id("Sensors"), "Sensors"), {}, {}, {}, {}});
  add(kRootNode, {object(plant_id("Actuators"), "Actuators"), {}, {}, {}, {}});
  add(kRootNode, {object(plant_id("Status"), "Status"), {}, {}, {}, {}});
  add(kRootNode, {object(plant_id("Methods"), "Methods"), {}, {}, {}, {}});

  auto sensor = [this](const std::string& name, double plant::PlantState::*field) {
    add(plant_id("Sensors"),
        {variable(plant_id(name), name, DataType::Float, false), {}, [this, field] { return json(plant_.*field); }, {}, {}});
  };
  sensor("temperature", &plant::PlantState::temperature);
  sensor("pressure", &plant::PlantState::pressure);
  sensor("flow_rate", &plant::PlantState::flow_rate);
  sensor("tank_level", &plant::PlantState::tank_level);
  sensor("vibration", &plant::PlantState::vibration);
  sensor("ph", &plant::PlantState::ph);
  sensor("humidity", &plant::PlantState::humidity);
  sensor("motor_speed", &plant::PlantState::motor_speed);

  auto float_actuator = [this](const std::string& name, double plant::PlantState::*field) {
    add(plant_id("Actuators"), {variable(plant_id(name), name, DataType::Float, true),
                                {},
                                [this, field] { return json(plant_.*field); },
                                [this, field](const json& v) { plant_.*field = v.get<double>(); },
                                {}});
  };
  auto bool_actuator = [this](const std::string& name, bool plant::PlantState::*field) {
    add(plant_id("Actuators"), {variable(plant_id(name), name, DataType::Boolean, true),
                                {},
                                [this, field] { return json(plant_.*field); },
                                [this, field](const json& v) { plant_.*field = v.get<bool>(); },
                                {}});
  };
  float_actuator("valve_position", &plant::PlantState::valve_position);
  float_actuator("heater_power", &plant::PlantState::heater_power);
  float_actuator("fan_speed", &plant::PlantState::fan_speed);
  float_actuator("conveyor_speed", &plant::PlantState::conveyor_speed);
  bool_actuator("pump_running", &plant::PlantState::pump_running);
  bool_actuator("emergency_stop", &plant::PlantState::emergency_stop);

  add(plant_id("Status"), {variable(plant_id("uptime_s"), "uptime_s", DataType::Double, false),
                           {},
                           [this] {
                             return json(std::chrono::duration<double>(std::chrono::steady_clock::now() - started_)
                                             .count());
                           },
                           {},
                           {}});
  add(plant_id("Status"), {variable(plant_id("simulation_tick"), "simulation_tick", DataType::Int32, false),
                           {},
                           [this] { return json(static_cast<std::int64_t>(plant_.ticks % 2147483648ull)); },
                           {},
                           {}});
  add(plant_id("Status"), {variable(plant_id("device_state"), "device_state", DataType::String, false),
                           {},
                           [this] { return json(device_state_); },
                           {},
                           {}});

  auto add_method = [this](const std::string& name, std::function<json(const json&)> fn) {
    add(plant_id("Methods"), {method(plant_id(name), name), {}, {}, {}, std::move(fn)});
  };
  add_method("start_pump", [this](const json&) {
    plant_.pump_running = true;
    return json{{"pump_running", true}};
  });
  add_method("stop_pump", [this](const json&) {
    plant_.pump_running = false;
    return json{{"pump_running", false}};
  });
  add_method("reset_counters", [this](const json&) {
    plant_.production_count = 0;
    plant_.ticks = 0;
    return json{{"production_count", 0}, {"simulation_tick", 0}};
  });
  add_method("set_mode", [this](const json& args) {
    const auto mode = method_arg(args, 0, "mode");
    if (!mode.is_string() || mode.get<std::string>().empty()) {
      throw Failure(ErrorClass::invalid_input, "set_mode expects one non-empty string argument 'mode'");
    }
    device_state_ = mode.get<std::string>();
    return json{{"device_state", device_state_}};
  });
  add_method("calibrate", [](const json&) { return json{{"calibrated", true}}; });
}

AddressSpace::Node& AddressSpace::add(const NodeId& parent, Node node) {
  const auto id = node.info.node_id;
  aliases_[NodeId{kPlantNamespace, next_alias_++}] = id;
  nodes_.at(parent).children.push_back(id);
  return nodes_[id] = std::move(node);
}

const NodeInfo* AddressSpace::find(const NodeId& id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    auto alias = aliases_.find(id);
    if (alias == aliases_.end()) return nullptr;
    it = nodes_.find(alias->second);
  }
  return &it->second.info;
}

const AddressSpace::Node& AddressSpace::require(const NodeId& id) const {
  const auto* info = find(id);
  if (!info) unknown_node(id);
  return nodes_.at(info->node_id);
}

json AddressSpace::read(const NodeId& id) const {
  const auto& n = require(id);
  if (n.info.node_class != NodeClass::Variable) {
    rejected(id, "not_a_variable", "node " + render(id) + " is not a variable");
  }
  return json{{"node_id", render(n.info.node_id)},
              {"browse_name", n.info.browse_name},
              {"datatype", to_string(*n.info.datatype)},
              {"value", n.get()}};
}

void AddressSpace::write(const NodeId& id, const json& value, std::optional<DataType> declared) {
  const auto& n = require(id);
  if (n.info.node_class != NodeClass::Variable || !n.info.writable || !n.set) {
    rejected(id, "access_denied", "node " + render(id) + " is not writable");
  }
  const auto type = *n.info.datatype;
  if ((declared && *declared != type) || !value_fits(type, value)) {
    rejected(id, "type_mismatch",
             "value " + value.dump() + " does not match the " + std::string(to_string(type)) + " node " + render(id));
  }
  n.set(value);
}

std::vector<NodeInfo> AddressSpace::browse(const NodeId& id) const {
  const auto& n = require(id);
  std::vector<NodeInfo> out;
  for (const auto& c : n.children) out.push_back(nodes_.at(c).info);
  return out;
}

json AddressSpace::list(const NodeId& root) const {
  json out = json::array();
  std::function<void(const Node&, const std::string&)> walk = [&](const Node& n, const std::string& path) {
    for (const auto& c : n.children) {
      const auto& child = nodes_.at(c);
      const auto child_path = path + "/" + child.info.browse_name;
      if (child.info.node_class == NodeClass::Variable) {
        auto entry = to_json(child.info);
        entry["path"] = child_path;
        entry["value"] = child.get();
        out.push_back(std::move(entry));
      }
      walk(child, child_path);
    }
  };
  const auto& start = require(root);
  walk(start, "");
  return out;
}

json AddressSpace::call(const NodeId& method_id, const json& args) {
  const auto& n = require(method_id);
  if (n.info.node_class != NodeClass::Method || !n.invoke) {
    throw Failure(ErrorClass::illegal_address, "node " + render(method_id) + " is not a method",
                  json{{"node_id", render(method_id)}});
  }
  return n.invoke(args);
}

json AddressSpace::status() const {
  return json{{"state", "running"},
              {"uptime_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count()},
              {"simulation_tick", plant_.ticks},
              {"device_state", device_state_}};
}

void AddressSpace::sim_tick(double dt_s) { plant::tick(plant_, dt_s, constants_); }

std::size_t AddressSpace::count(NodeClass c) const {
  std::size_t n = 0;
  for (const auto& [id, node] : nodes_) n += node.info.node_class == c ? 1 : 0;
  return n;
}

json handle_request(AddressSpace& space, std::mutex& mu, const json& request) {
  json id = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
  try {
    if (!request.is_object() || !request.contains("op") || !request["op"].is_string()) {
      throw Failure(ErrorClass::invalid_input, "request must be an object with a string 'op'");
    }
    const auto op = request["op"].get<std::string>();
    const json params = request.contains("params") ? request["params"] : json::object();
    if (!params.is_object()) throw Failure(ErrorClass::invalid_input, "params must be an object");
    auto node_param = [&](const char* key) {
      if (!params.contains(key) || !params[key].is_string()) {
        throw Failure(ErrorClass::invalid_input, std::string("missing string parameter '") + key + "'");
      }
      return parse_node_id(params[key].get<std::string>());
    };

    json result;
    std::lock_guard lock(mu);
    if (op == "status") {
      result = space.status();
    } else if (op == "read") {
      result = space.read(node_param("node_id"));
    } else if (op == "write") {
      if (!params.contains("value")) throw Failure(ErrorClass::invalid_input, "missing parameter 'value'");
      std::optional<DataType> declared;
      if (params.contains("datatype") && !params["datatype"].is_null()) {
        declared = params["datatype"].is_string() ? parse_datatype(params["datatype"].get<std::string>())
                                                  : std::nullopt;
        if (!declared) throw Failure(ErrorClass::invalid_input, "unknown datatype " + params["datatype"].dump());
      }
      const auto node = node_param("node_id");
      space.write(node, params["value"], declared);
      result = space.read(node);
    } else if (op == "browse") {
      result = json::array();
      for (const auto& n : space.browse(node_param("node_id"))) result.push_back(to_json(n));
    } else if (op == "read_many") {
      if (!params.contains("node_ids") || !params["node_ids"].is_array()) {
        throw Failure(ErrorClass::invalid_input, "missing array parameter 'node_ids'");
      }
      std::vector<NodeId> ids;
      for (const auto& v : params["node_ids"]) {
        if (!v.is_string()) throw Failure(ErrorClass::invalid_input, "node_ids must hold strings");
        ids.push_back(parse_node_id(v.get<std::string>()));
      }
      result = json::array();
      for (const auto& nid : ids) result.push_back(space.read(nid));
    } else if (op == "list") {
      result = space.list(params.contains("root") ? node_param("root") : kRootNode);
    } else if (op == "call") {
      result = space.call(node_param("method_id"), params.value("args", json::array()));
    } else {
      throw Failure(ErrorClass::invalid_input, "unknown op '" + op + "'");
    }
    return json{{"id", id}, {"ok", true}, {"result", std::move(result)}};
  } catch (const Failure& f) {
    json error{{"class", to_string(f.error_class())}, {"message", f.what()}};
    if (!f.details().is_null()) error["details"] = f.details();
    return json{{"id", id}, {"ok", false}, {"error", std::move(error)}};
  }
}

UaMock::UaMock(MockOptions options)
    : options_(std::move(options)), server_(options_.bind, [this](const net::Fd& c) { serve_connection(c); }) {}

UaMock::~UaMock() { stop(); }

void UaMock::start() {
  server_.start();
  if (options_.simulate && options_.tick_hz > 0.0) {
    sim_stop_ = false;
    sim_ = std::thread([this] {
      const auto period = std::chrono::duration<double>(1.0 / options_.tick_hz);
      auto next = std::chrono::steady_clock::now();
      std::unique_lock lock(sim_mu_);
      for (;;) {
        next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
        if (sim_cv_.wait_until(lock, next, [this] { return sim_stop_; })) return;
        std::lock_guard space_lock(space_mu_);
        space_.sim_tick(period.count());
      }
    });
  }
}

void UaMock::stop() {
  {
    std::lock_guard lock(sim_mu_);
    sim_stop_ = true;
    sim_cv_.notify_all();
  }
  if (sim_.joinable()) sim_.join();
  server_.stop();
}

void UaMock::serve_connection(const net::Fd& conn) {
  net::LineReader reader(conn.get());
  try {
    while (auto line = reader.next()) {
      if (line->empty()) continue;
      json response;
      try {
        response = handle_request(space_, space_mu_, json::parse(*line));
      } catch (const json::parse_error& e) {
        response = json{{"id", nullptr},
                        {"ok", false},
                        {"error", {{"class", "protocol_error"}, {"message", std::string("malformed request: ") + e.what()}}}};
      }
      ++served_;
      net::send_all(conn, response.dump() + "\n");
    }
  } catch (const std::exception&) {
  }
}

}  // namespace otmcp::ua
