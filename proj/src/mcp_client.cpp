#include "otmcp/mcp_client.hpp"

#include <cerrno>
#include <csignal>
#include <unistd.h>

#include "otmcp/mcp.hpp"
#include "otmcp/net.hpp"

namespace otmcp::mcp {

namespace {

double ms_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

CallMeta harness_meta(const LaunchSpec& launch, double latency_ms) {
  CallMeta meta;
  meta.latency_ms = latency_ms;
  meta.endpoint = "stdio:" + (launch.argv.empty() ? std::string("?") : launch.argv.front());
  meta.attempts = 1;
  meta.protocol = "mcp";
  return meta;
}

}  // namespace

Session::Session(const LaunchSpec& launch) : launch_(launch) {}

std::unique_ptr<Session> Session::open(const LaunchSpec& launch, std::chrono::milliseconds init_timeout) {
  static std::once_flag ignore_sigpipe;
  std::call_once(ignore_sigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });
  std::unique_ptr<Session> session(new Session(launch));
  SpawnOptions opts;
  opts.argv = launch.argv;
  opts.env = launch.env;
  opts.pipe_stdin = true;
  opts.pipe_stdout = true;
  opts.stderr_path = launch.stderr_path;
  opts.batch_scheduling = launch.batch_scheduling;
  try {
    session->child_ = ChildProcess::spawn(opts);
  } catch (const std::exception& e) {
    throw SessionError(std::string("spawn failed: ") + e.what());
  }
  session->open_ = true;
  session->reader_ = std::thread([s = session.get()] { s->read_loop(); });

  json init_params = {
      {"protocolVersion", std::string(kProtocolVersion)},
      {"capabilities", json::object()},
      {"clientInfo", {{"name", "otmcp-bench"}, {"version", "0.1.0"}}},
  };
  try {
    json result = session->request("initialize", init_params, init_timeout);
    session->server_info_ = result.value("serverInfo", json::object());
  } catch (const SessionError& e) {
    session->close();
    throw SessionError(std::string("initialize failed: ") + e.what());
  }
  {
    std::lock_guard lock(session->write_mu_);
    const std::string note = R"({"jsonrpc":"2.0","method":"notifications/initialized"})" "\n";
    if (::write(session->child_.stdin_fd(), note.data(), note.size()) < 0) {
      session->broken_ = true;
    }
  }
  return session;
}

Session::~Session() { close(); }

std::future<Session::Reply> Session::send(std::int64_t id, const json& message) {
  std::future<Reply> fut;
  {
    std::lock_guard lock(pending_mu_);
    auto [it, _] = pending_.emplace(id, std::promise<Reply>{});
    fut = it->second.get_future();
  }
  if (broken_) {
    fail_pending();
    return fut;
  }
  const std::string text = dump_json(message) + "\n";
  std::lock_guard lock(write_mu_);
  std::size_t off = 0;
  while (off < text.size()) {
    ssize_t n = ::write(child_.stdin_fd(), text.data() + off, text.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      broken_ = true;
      fail_pending();
      break;
    }
    off += static_cast<std::size_t>(n);
  }
  return fut;
}

json Session::request(const std::string& method, const json& params, std::chrono::milliseconds timeout) {
  if (!open_) throw SessionError("session is closed");
  const std::int64_t id = next_id_++;
  json msg = {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
  auto fut = send(id, msg);
  if (fut.wait_for(timeout) != std::future_status::ready) {
    std::lock_guard lock(pending_mu_);
    pending_.erase(id);
    throw SessionError(method + " timed out");
  }
  Reply reply = fut.get();
  if (reply.broken) throw SessionError(method + ": server connection lost");
  if (reply.message.contains("error")) {
    throw SessionError(method + " failed: " + dump_json(reply.message["error"]));
  }
  return reply.message.value("result", json{});
}

json Session::list_tools(std::chrono::milliseconds timeout) {
  return request("tools/list", json::object(), timeout).value("tools", json::array());
}

CallResult Session::call(const std::string& tool, const json& arguments, std::chrono::milliseconds timeout) {
  return finish(begin(tool, arguments), timeout);
}

Session::InFlight Session::begin(const std::string& tool, const json& arguments) {
  if (!open_) throw SessionError("session is closed");
  InFlight pending;
  pending.id = next_id_++;
  pending.tool = tool;
  json msg = {{"jsonrpc", "2.0"},
              {"id", pending.id},
              {"method", "tools/call"},
              {"params", {{"name", tool}, {"arguments", arguments}}}};
  pending.started = std::chrono::steady_clock::now();
  pending.reply = send(pending.id, msg);
  return pending;
}

CallResult Session::finish(InFlight pending, std::chrono::milliseconds timeout) {
  CallResult out{Envelope::success({}, harness_meta(launch_, 0.0)), 0.0, pending.started, {}};
  const auto& tool = pending.tool;
  const bool ready = pending.reply.wait_until(pending.started + timeout) == std::future_status::ready;
  Reply reply = ready ? pending.reply.get() : Reply{};
  out.finished = ready ? reply.received : std::chrono::steady_clock::now();
  out.harness_latency_ms = ms_between(out.started, out.finished);
  const auto meta = harness_meta(launch_, out.harness_latency_ms);

  if (!ready) {
    std::lock_guard lock(pending_mu_);
    pending_.erase(pending.id);
    out.envelope = Envelope::failure(ErrorClass::timeout, "tool call timed out",
                                     {{"tool", tool}, {"timeout_ms", timeout.count()}}, meta);
    return out;
  }
  if (reply.broken) {
    out.envelope = Envelope::failure(ErrorClass::endpoint_unreachable, "adapter process is not responding",
                                     {{"tool", tool}}, meta);
    return out;
  }
  if (reply.message.contains("error")) {
    const auto& err = reply.message["error"];
    const int code = err.value("code", 0);
    out.envelope = Envelope::failure(
        code == kInvalidParams ? ErrorClass::invalid_input : ErrorClass::protocol_error,
        err.value("message", std::string("JSON-RPC error")), {{"rpc_code", code}}, meta);
    return out;
  }
  try {
    const auto& result = reply.message.at("result");
    const auto& text = result.at("content").at(0).at("text").get_ref<const std::string&>();
    out.envelope = Envelope::parse(text);
  } catch (const std::exception& e) {
    out.envelope = Envelope::failure(ErrorClass::protocol_error,
                                     std::string("malformed tool result: ") + e.what(), {}, meta);
  }
  return out;
}

void Session::read_loop() {
  net::LineReader reader(child_.stdout_fd());
  while (auto line = reader.next()) {
    const auto received = std::chrono::steady_clock::now();
    json msg;
    try {
      msg = json::parse(*line);
    } catch (const json::parse_error&) {
      continue;
    }
    if (!msg.is_object() || !msg.contains("id") || !msg["id"].is_number_integer()) continue;
    const auto id = msg["id"].get<std::int64_t>();
    std::lock_guard lock(pending_mu_);
    auto it = pending_.find(id);
    if (it == pending_.end()) continue;
    it->second.set_value(Reply{false, std::move(msg), received});
    pending_.erase(it);
  }
  broken_ = true;
  fail_pending();
}

void Session::fail_pending() {
  std::lock_guard lock(pending_mu_);
  const auto now = std::chrono::steady_clock::now();
  for (auto& [id, promise] : pending_) promise.set_value(Reply{true, {}, now});
  pending_.clear();
}

void Session::close() {
  const bool was_open = open_.exchange(false);
  if (!was_open && !reader_.joinable()) return;
  child_.close_stdin();
  if (!child_.wait_for(std::chrono::milliseconds(1500))) child_.stop(std::chrono::milliseconds(500));
  if (reader_.joinable()) reader_.join();
}

}  // namespace otmcp::mcp
