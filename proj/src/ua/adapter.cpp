#include "otmcp/ua/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <unistd.h>

#include "otmcp/env.hpp"

namespace otmcp::ua {

namespace {

namespace args = mcp::args;
using mcp::ArgError;
using mcp::CallScope;

constexpr std::string_view kProtocol = "ua";
constexpr std::size_t kMaxReadNodes = 256;

std::string arg_node(const json& a, std::string_view key) { return render(parse_node_id(args::get_string(a, key))); }

json node_prop(const char* what) { return {{"type", "string"}, {"description", what}}; }

}  // namespace

AdapterConfig config_from_env() {
  AdapterConfig cfg;
  if (auto uri = env::get("UA_ENDPOINT"); uri && !uri->empty()) {
    cfg.client.endpoint = net::parse_endpoint(*uri, 4840);
    return cfg;
  }
  cfg.client.endpoint.host = env::get_or("UA_HOST", "127.0.0.1");
  const double port = env::number("UA_PORT", 4840);
  if (port < 1 || port > 65535 || port != std::floor(port)) {
    throw std::invalid_argument("UA_PORT must be an integer in 1..65535");
  }
  cfg.client.endpoint.port = static_cast<std::uint16_t>(port);
  return cfg;
}

Adapter::Adapter(AdapterConfig config)
    : config_(std::move(config)),
      client_(config_.client),
      registry_(std::string(kProtocol), [this] { return endpoint_uri(); }) {
  register_tools();
}

void Adapter::register_tools() {
  auto guarded = [this](auto body) {
    return [this, body](const json& a) -> Envelope {
      CallScope scope(std::string(kProtocol), endpoint_uri());
      try {
        return scope.ok(body(scope, a));
      } catch (const Failure& f) {
        if (f.details().is_object() && f.details().contains("attempts")) {
          scope.set_attempts(f.details()["attempts"].get<int>());
        }
        return scope.fail(f.error_class(), f.what(), f.details());
      } catch (const ArgError& e) {
        return scope.fail(ErrorClass::invalid_input, e.what());
      }
    };
  };

  // One wire operation; the call's attempts are the most any operation needed.
  auto op = [this](CallScope& scope, int& attempts, const std::string& name, const json& params) {
    auto reply = client_.request(name, params);
    attempts = std::max(attempts, reply.attempts);
    scope.set_attempts(attempts);
    return std::move(reply.result);
  };

  auto add = [this](std::string name, std::string description, json schema, mcp::ToolHandler handler) {
    registry_.add({std::move(name), std::move(description), std::move(schema)}, std::move(handler));
  };

  add("server_status", "Report the server state, uptime and simulation tick.", mcp::object_schema(json::object()),
      guarded([this, op](CallScope& scope, const json&) {
        int attempts = 0;
        const auto s = op(scope, attempts, "status", json::object());
        return json{{"state", s.value("state", "unknown")},
                    {"uptime_s", s.value("uptime_s", 0.0)},
                    {"endpoint", endpoint_uri()},
                    {"simulation_tick", s.value("simulation_tick", 0)}};
      }));

  add("read_node", "Read the value of one variable node.",
      mcp::object_schema({{"node_id", node_prop("NodeId, e.g. ns=2;s=temperature")}}, {"node_id"}),
      guarded([op](CallScope& scope, const json& a) {
        int attempts = 0;
        return op(scope, attempts, "read", json{{"node_id", arg_node(a, "node_id")}});
      }));

  add("write_node", "Write a value to a writable variable node.",
      mcp::object_schema({{"node_id", node_prop("NodeId of a writable variable")},
                          {"value", {{"description", "New value matching the node datatype"}}},
                          {"datatype",
                           {{"type", "string"}, {"enum", {"Float", "Double", "Boolean", "Int32", "String"}}}}},
                         {"node_id", "value"}),
      guarded([op](CallScope& scope, const json& a) {
        json params{{"node_id", arg_node(a, "node_id")}, {"value", args::get_value(a, "value")}};
        if (auto dt = args::opt_string(a, "datatype")) {
          if (!parse_datatype(*dt)) throw ArgError("unknown datatype: " + *dt + " (Float, Double, Boolean, Int32, String)");
          params["datatype"] = *dt;
        }
        int attempts = 0;
        auto result = op(scope, attempts, "write", params);
        result["written"] = true;
        return result;
      }));

  add("browse", "List the child nodes of a node (default: the Objects root).",
      mcp::object_schema({{"node_id", node_prop("NodeId to browse; defaults to ns=0;i=85")}}),
      guarded([op](CallScope& scope, const json& a) {
        const auto node = args::opt_string(a, "node_id") ? arg_node(a, "node_id") : render(kRootNode);
        int attempts = 0;
        auto children = op(scope, attempts, "browse", json{{"node_id", node}});
        const auto count = children.size();
        return json{{"node_id", node}, {"children", std::move(children)}, {"count", count}};
      }));

  add("read_nodes", "Read several variable nodes in one request.",
      mcp::object_schema({{"node_ids",
                           {{"type", "array"},
                            {"items", {{"type", "string"}}},
                            {"minItems", 1},
                            {"maxItems", kMaxReadNodes}}}},
                         {"node_ids"}),
      guarded([op](CallScope& scope, const json& a) {
        const auto& ids = args::get_array(a, "node_ids");
        if (ids.empty() || ids.size() > kMaxReadNodes) {
          throw ArgError("node_ids must hold 1.." + std::to_string(kMaxReadNodes) + " ids");
        }
        json rendered = json::array();
        for (std::size_t i = 0; i < ids.size(); ++i) {
          if (!ids[i].is_string()) throw ArgError("node_ids[" + std::to_string(i) + "] must be a string");
          rendered.push_back(render(parse_node_id(ids[i].get<std::string>())));
        }
        int attempts = 0;
        auto values = op(scope, attempts, "read_many", json{{"node_ids", rendered}});
        const auto count = values.size();
        return json{{"values", std::move(values)}, {"count", count}};
      }));

  add("list_variables", "Enumerate every variable below a node with its current value.",
      mcp::object_schema({{"root", node_prop("NodeId to start from; defaults to ns=0;i=85")}}),
      guarded([op](CallScope& scope, const json& a) {
        const auto root = args::opt_string(a, "root") ? arg_node(a, "root") : render(kRootNode);
        int attempts = 0;
        json variables = json::array();
        std::function<void(const std::string&, const std::string&)> walk = [&](const std::string& node,
                                                                              const std::string& path) {
          for (const auto& c : op(scope, attempts, "browse", json{{"node_id", node}})) {
            const auto info = node_info_from_json(c);
            const auto id = render(info.node_id);
            const auto child_path = path + "/" + info.browse_name;
            if (info.node_class == NodeClass::Variable) {
              const auto r = op(scope, attempts, "read", json{{"node_id", id}});
              variables.push_back(json{{"node_id", id},
                                       {"browse_name", info.browse_name},
                                       {"path", child_path},
                                       {"datatype", to_string(*info.datatype)},
                                       {"value", r.at("value")},
                                       {"access", {{"readable", info.readable}, {"writable", info.writable}}}});
            }
            if (info.node_class == NodeClass::Object) walk(id, child_path);
          }
        };
        walk(root, "");
        const auto count = variables.size();
        return json{{"root", root}, {"variables", std::move(variables)}, {"count", count}};
      }));

  add("call_method", "Invoke a method node with optional arguments.",
      mcp::object_schema({{"method_id", node_prop("NodeId of the method, e.g. ns=2;s=reset_counters")},
                          {"args", {{"description", "Positional array or named object of arguments"}}}},
                         {"method_id"}),
      guarded([op](CallScope& scope, const json& a) {
        const auto method = arg_node(a, "method_id");
        json call_args = a.contains("args") ? a["args"] : json::array();
        if (call_args.is_null()) call_args = json::array();
        if (!call_args.is_array() && !call_args.is_object()) throw ArgError("args must be an array or an object");
        int attempts = 0;
        auto outputs = op(scope, attempts, "call", json{{"method_id", method}, {"args", call_args}});
        return json{{"method_id", method}, {"outputs", std::move(outputs)}};
      }));
}

int run_stdio_server() {
  std::unique_ptr<Adapter> adapter;
  try {
    adapter = std::make_unique<Adapter>(config_from_env());
  } catch (const std::exception& e) {
    std::cerr << "ua adapter: " << e.what() << '\n';
    return 2;
  }
  mcp::serve(adapter->registry(), mcp::ServerInfo{"otmcp-ua"}, STDIN_FILENO, STDOUT_FILENO);
  return 0;
}

}  // namespace otmcp::ua
