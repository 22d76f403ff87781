#include "otmcp/mqtt/mock.hpp"

#include <cmath>
#include <numbers>
#include <unistd.h>

namespace otmcp::mqtt {

namespace sp = sparkplug;

namespace {

std::uint64_t now_ms() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count());
}

}  // namespace

std::vector<SimDevice> default_devices() {
  return {
      {std::string(sp::Defaults::device_1), {{"temperature", 25.0, 5.0, 60.0}, {"humidity", 40.0, 10.0, 90.0}}},
      {std::string(sp::Defaults::device_2), {{"pressure", 1013.0, 20.0, 120.0}, {"flow", 50.0, 15.0, 45.0}}},
  };
}

double metric_value(const SimMetric& m, double t_s) {
  return m.base + m.amplitude * std::sin(2.0 * std::numbers::pi * t_s / m.period_s);
}

Simulator::Simulator(SimulatorOptions options)
    : options_(std::move(options)),
      client_(ClientOptions{options_.broker,
                            "otmcp-sim-" + options_.edge_node_id + "-" + std::to_string(::getpid()),
                            60,
                            ReconnectPolicy{0.5, 2.0, 4.0},
                            std::chrono::milliseconds(1000),
                            std::chrono::milliseconds(2000),
                            16}) {}

Simulator::~Simulator() { stop(); }

void Simulator::start() {
  client_.set_on_connected([this](bool) { publish_births(); });
  client_.start();
  std::lock_guard lock(loop_mu_);
  if (loop_.joinable()) return;
  stop_ = false;
  loop_ = std::thread([this] {
    const auto period = std::chrono::duration<double>(1.0 / options_.tick_hz);
    auto next = std::chrono::steady_clock::now();
    std::unique_lock lock(loop_mu_);
    for (std::uint64_t k = 0;; ++k) {
      if (loop_cv_.wait_until(lock, next, [this] { return stop_; })) return;
      lock.unlock();
      publish_ddata(static_cast<double>(k) / options_.tick_hz);
      lock.lock();
      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    }
  });
}

void Simulator::stop() {
  {
    std::lock_guard lock(loop_mu_);
    stop_ = true;
    loop_cv_.notify_all();
  }
  if (loop_.joinable()) loop_.join();
  bool live;
  {
    std::lock_guard lock(seq_mu_);
    live = session_live_;
    session_live_ = false;
  }
  if (live && client_.connected()) {
    sp::Payload death{now_ms(), {{"bdSeq", std::nullopt, std::nullopt, sp::MetricValue{bd_seq_}}}, std::nullopt};
    try {
      publish(sp::MessageType::NDEATH, std::nullopt, std::move(death), false);
    } catch (const std::exception&) {
    }
  }
  client_.stop();
}

std::vector<sp::Metric> Simulator::device_metrics(const SimDevice& d, double t_s) const {
  std::vector<sp::Metric> out;
  for (const auto& m : d.metrics) {
    out.push_back({m.name, std::nullopt, std::nullopt, sp::MetricValue{static_cast<float>(metric_value(m, t_s))}});
  }
  return out;
}

void Simulator::publish(sp::MessageType type, const std::optional<std::string>& device, sp::Payload payload,
                        bool with_seq) {
  if (with_seq) payload.seq = type == sp::MessageType::NBIRTH ? seq_.birth() : seq_.next();
  const auto topic = sp::render_topic({options_.group_id, type, options_.edge_node_id, device});
  const auto bytes = sp::encode_payload(payload);
  client_.publish(topic, std::string(bytes.begin(), bytes.end()), 0, false);
}

void Simulator::publish_births() {
  std::lock_guard lock(seq_mu_);
  session_live_ = false;
  try {
    const auto ts = now_ms();
    if (births_ > 0) ++bd_seq_;
    publish(sp::MessageType::NBIRTH, std::nullopt,
            {ts, {{"bdSeq", std::nullopt, std::nullopt, sp::MetricValue{bd_seq_}}}, std::nullopt}, true);
    for (const auto& d : options_.devices) {
      publish(sp::MessageType::DBIRTH, d.device_id, {ts, device_metrics(d, t_now_), std::nullopt}, true);
    }
    session_live_ = true;
    ++births_;
  } catch (const std::exception&) {
  }
}

void Simulator::publish_ddata(double t_s) {
  std::lock_guard lock(seq_mu_);
  t_now_ = t_s;
  ++ticks_;
  if (!session_live_) return;
  try {
    const auto ts = now_ms();
    for (const auto& d : options_.devices) {
      publish(sp::MessageType::DDATA, d.device_id, {ts, device_metrics(d, t_s), std::nullopt}, true);
    }
  } catch (const std::exception&) {
    session_live_ = false;
  }
}

MqttMock::MqttMock(MqttMockOptions options) : options_(std::move(options)), broker_(options_.bind) {}

MqttMock::~MqttMock() { stop(); }

void MqttMock::start() {
  broker_.start();
  if (options_.simulate && options_.tick_hz > 0.0) {
    SimulatorOptions so;
    so.broker = {"127.0.0.1", broker_.port()};
    so.group_id = options_.group_id;
    so.edge_node_id = options_.edge_node_id;
    so.tick_hz = options_.tick_hz;
    sim_ = std::make_unique<Simulator>(std::move(so));
    sim_->start();
  }
}

void MqttMock::stop() {
  if (sim_) sim_->stop();
  sim_.reset();
  broker_.stop();
}

}  // namespace otmcp::mqtt
