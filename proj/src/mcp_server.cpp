#include <cerrno>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unistd.h>

#include "otmcp/mcp.hpp"
#include "otmcp/net.hpp"

namespace otmcp::mcp {

namespace {

bool valid_tool_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

json rpc_error(const json& id, int code, std::string message) {
  return {{"jsonrpc", "2.0"}, {"id", id}, {"error", {{"code", code}, {"message", std::move(message)}}}};
}

json rpc_result(const json& id, json result) {
  return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

json initialize_result(const ServerInfo& info) {
  return {
      {"protocolVersion", std::string(kProtocolVersion)},
      {"capabilities", {{"tools", {{"listChanged", false}}}}},
      {"serverInfo", {{"name", info.name}, {"version", info.version}}},
  };
}

struct Parsed {
  json message;
  std::optional<json> immediate;  // response that needs no tool execution
  bool is_call = false;
};

Parsed classify(const ToolRegistry& registry, const ServerInfo& info, std::string_view line) {
  Parsed p;
  try {
    p.message = json::parse(line);
  } catch (const json::parse_error&) {
    p.immediate = rpc_error(nullptr, kParseError, "Parse error");
    return p;
  }
  const json& msg = p.message;
  if (!msg.is_object() || !msg.contains("method") || !msg["method"].is_string()) {
    // Responses from the peer are ignored; anything else is malformed.
    if (msg.is_object() && (msg.contains("result") || msg.contains("error"))) return p;
    p.immediate = rpc_error(msg.is_object() ? msg.value("id", json{}) : json{}, kInvalidRequest,
                            "Invalid Request");
    return p;
  }
  const bool notification = !msg.contains("id");
  const std::string method = msg["method"].get<std::string>();
  const json id = notification ? json{} : msg["id"];

  if (method == "tools/call") {
    if (notification) return p;
    p.is_call = true;
    return p;
  }
  if (notification) return p;
  if (method == "initialize") {
    p.immediate = rpc_result(id, initialize_result(info));
  } else if (method == "tools/list") {
    p.immediate = rpc_result(id, {{"tools", registry.list()}});
  } else if (method == "ping") {
    p.immediate = rpc_result(id, json::object());
  } else {
    p.immediate = rpc_error(id, kMethodNotFound, "Method not found: " + method);
  }
  return p;
}

json execute_call(const ToolRegistry& registry, const json& msg) {
  const json id = msg["id"];
  const json params = msg.value("params", json::object());
  if (!params.is_object() || !params.contains("name") || !params["name"].is_string()) {
    return rpc_error(id, kInvalidParams, "tools/call requires params.name");
  }
  const std::string name = params["name"].get<std::string>();
  json arguments = params.value("arguments", json::object());
  if (arguments.is_null()) arguments = json::object();
  if (!arguments.is_object()) return rpc_error(id, kInvalidParams, "arguments must be an object");
  auto env = registry.invoke(name, arguments);
  if (!env) return rpc_error(id, kInvalidParams, "Unknown tool: " + name);
  return rpc_result(id, wrap_tool_result(*env));
}

class WorkerPool {
 public:
  explicit WorkerPool(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) threads_.emplace_back([this] { run(); });
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }
  void submit(std::function<void()> job) {
    {
      std::lock_guard lock(mu_);
      jobs_.push_back(std::move(job));
    }
    cv_.notify_one();
  }

 private:
  void run() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  std::vector<std::thread> threads_;
  bool stopping_ = false;
};

void write_line(int fd, const std::string& text) {
  std::size_t off = 0;
  while (off < text.size()) {
    ssize_t n = ::write(fd, text.data() + off, text.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return;  // peer gone; nothing left to answer
    }
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

json ToolDescriptor::to_json() const {
  return {{"name", name}, {"description", description}, {"inputSchema", input_schema}};
}

CallScope::CallScope(std::string protocol, std::string endpoint)
    : start_(std::chrono::steady_clock::now()),
      protocol_(std::move(protocol)),
      endpoint_(std::move(endpoint)) {}

CallMeta CallScope::meta() const {
  const auto elapsed = std::chrono::steady_clock::now() - start_;
  CallMeta m;
  m.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  m.endpoint = endpoint_;
  m.attempts = attempts_;
  m.protocol = protocol_;
  m.trace = trace_;
  return m;
}

Envelope CallScope::ok(json data) const { return Envelope::success(std::move(data), meta()); }

Envelope CallScope::fail(ErrorClass error_class, std::string message, json details) const {
  return Envelope::failure(error_class, std::move(message), std::move(details), meta());
}

ToolRegistry::ToolRegistry(std::string protocol, std::function<std::string()> endpoint)
    : protocol_(std::move(protocol)), endpoint_(std::move(endpoint)) {}

void ToolRegistry::add(ToolDescriptor descriptor, ToolHandler handler) {
  if (!valid_tool_name(descriptor.name)) {
    throw std::invalid_argument("invalid tool name: " + descriptor.name);
  }
  if (contains(descriptor.name)) throw std::invalid_argument("duplicate tool: " + descriptor.name);
  if (!descriptor.input_schema.is_object() || descriptor.input_schema.value("type", "") != "object") {
    throw std::invalid_argument("input schema for " + descriptor.name + " must be an object schema");
  }
  tools_.push_back({std::move(descriptor), std::move(handler)});
}

json ToolRegistry::list() const {
  json out = json::array();
  for (const auto& t : tools_) out.push_back(t.descriptor.to_json());
  return out;
}

bool ToolRegistry::contains(std::string_view name) const {
  for (const auto& t : tools_) {
    if (t.descriptor.name == name) return true;
  }
  return false;
}

std::optional<Envelope> ToolRegistry::invoke(std::string_view name, const json& args) const {
  for (const auto& t : tools_) {
    if (t.descriptor.name != name) continue;
    CallScope scope(protocol_, endpoint_ ? endpoint_() : std::string{});
    try {
      return t.handler(args);
    } catch (const ArgError& e) {
      return scope.fail(ErrorClass::invalid_input, e.what());
    } catch (const Failure& e) {
      return scope.fail(e.error_class(), e.what(), e.details());
    } catch (const std::exception& e) {
      return scope.fail(ErrorClass::internal, std::string("tool failed: ") + e.what());
    } catch (...) {
      return scope.fail(ErrorClass::internal, "tool failed with an unknown exception");
    }
  }
  return std::nullopt;
}

json wrap_tool_result(const Envelope& env) {
  return {
      {"content", json::array({{{"type", "text"}, {"text", env.serialize()}}})},
      {"isError", !env.ok()},
  };
}

std::optional<json> handle_line(const ToolRegistry& registry, const ServerInfo& info,
                                std::string_view line) {
  auto parsed = classify(registry, info, line);
  if (parsed.immediate) return parsed.immediate;
  if (parsed.is_call) return execute_call(registry, parsed.message);
  return std::nullopt;
}

void serve(const ToolRegistry& registry, const ServerInfo& info, int in_fd, int out_fd,
           ServeOptions options) {
  std::mutex out_mu;
  auto emit = [&](const json& response) {
    const std::string text = dump_json(response) + "\n";
    std::lock_guard lock(out_mu);
    write_line(out_fd, text);
  };

  WorkerPool pool(options.workers == 0 ? 1 : options.workers);
  net::LineReader reader(in_fd);
  while (auto line = reader.next()) {
    if (line->find_first_not_of(" \t\r") == std::string::npos) continue;
    auto parsed = classify(registry, info, *line);
    if (parsed.immediate) {
      emit(*parsed.immediate);
    } else if (parsed.is_call) {
      pool.submit([&registry, &emit, msg = std::move(parsed.message)] {
        emit(execute_call(registry, msg));
      });
    }
  }
  // Pool destructor drains queued calls before returning.
}

namespace args {

namespace {

const json* find(const json& a, std::string_view key) {
  if (!a.is_object()) return nullptr;
  auto it = a.find(std::string(key));
  if (it == a.end() || it->is_null()) return nullptr;
  return &*it;
}

std::int64_t as_int(const json& v, std::string_view key) {
  if (v.is_number_integer()) {
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      throw ArgError(std::string(key) + " is out of the 64-bit integer range");
    }
    return v.get<std::int64_t>();
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && std::floor(d) == d && std::fabs(d) < 9.0e18) {
      return static_cast<std::int64_t>(d);
    }
  }
  throw ArgError(std::string(key) + " must be an integer");
}

}  // namespace

std::int64_t get_int(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  return as_int(*v, key);
}

std::optional<std::int64_t> opt_int(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) return std::nullopt;
  return as_int(*v, key);
}

double get_number(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  if (!v->is_number()) throw ArgError(std::string(key) + " must be a number");
  return v->get<double>();
}

std::string get_string(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  if (!v->is_string()) throw ArgError(std::string(key) + " must be a string");
  return v->get<std::string>();
}

std::optional<std::string> opt_string(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) throw ArgError(std::string(key) + " must be a string");
  return v->get<std::string>();
}

bool get_bool(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  if (!v->is_boolean()) throw ArgError(std::string(key) + " must be a boolean");
  return v->get<bool>();
}

std::optional<bool> opt_bool(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) throw ArgError(std::string(key) + " must be a boolean");
  return v->get<bool>();
}

const json& get_array(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  if (!v->is_array()) throw ArgError(std::string(key) + " must be an array");
  return *v;
}

const json& get_value(const json& a, std::string_view key) {
  const json* v = find(a, key);
  if (!v) throw ArgError("missing required argument: " + std::string(key));
  return *v;
}

}  // namespace args

json object_schema(json properties, std::vector<std::string> required) {
  json schema = {{"type", "object"}, {"properties", properties.is_null() ? json::object() : properties}};
  if (!required.empty()) schema["required"] = required;
  return schema;
}

}  // namespace otmcp::mcp
