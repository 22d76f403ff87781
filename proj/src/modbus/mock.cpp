#include "otmcp/modbus/mock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace otmcp::modbus {

namespace {

std::uint16_t to_register(double physical, double scale) {
  const double raw = std::round(physical * scale);
  return static_cast<std::uint16_t>(std::clamp(raw, 0.0, 65535.0));
}

ExceptionResponse exception_for(std::uint8_t function, ExceptionCode code) {
  return ExceptionResponse{function, static_cast<std::uint8_t>(code)};
}

bool range_ok(std::uint32_t address, std::uint32_t count) {
  return count >= 1 && address + count <= kBankSize;
}

}  // namespace

ModbusDevice::ModbusDevice(DeviceIdentity identity, plant::Constants constants)
    : constants_(constants), identity_(std::move(identity)) {
  bank_.coils[plant_map::pump_running] = plant_.pump_running;
  bank_.coils[plant_map::emergency_stop] = plant_.emergency_stop;
  publish_sensors();
}

void ModbusDevice::publish_sensors() {
  auto& in = bank_.input;
  in[plant_map::temperature] = to_register(plant_.temperature, kSensorScale);
  in[plant_map::pressure] = to_register(plant_.pressure, kSensorScale);
  in[plant_map::flow_rate] = to_register(plant_.flow_rate, kSensorScale);
  in[plant_map::tank_level] = to_register(plant_.tank_level, kSensorScale);
  in[plant_map::vibration] = to_register(plant_.vibration, kSensorScale);
  in[plant_map::ph] = to_register(plant_.ph, kSensorScale);
  in[plant_map::humidity] = to_register(plant_.humidity, kSensorScale);
  in[plant_map::motor_speed] = to_register(plant_.motor_speed, kSensorScale);
  in[plant_map::production_count] = static_cast<std::uint16_t>(std::min<std::uint32_t>(plant_.production_count, 65535));
  bank_.discrete[plant_map::pump_feedback] = plant_.pump_running;
  bank_.discrete[plant_map::high_temp_alarm] = plant_.temperature > 50.0;
}

void ModbusDevice::pull_actuators() {
  plant_.valve_position = bank_.holding[plant_map::valve_position];
  plant_.heater_power = bank_.holding[plant_map::heater_power];
  plant_.fan_speed = bank_.holding[plant_map::fan_speed];
  plant_.conveyor_speed = bank_.holding[plant_map::conveyor_speed];
  plant_.pump_running = bank_.coils[plant_map::pump_running];
  plant_.emergency_stop = bank_.coils[plant_map::emergency_stop];
}

void ModbusDevice::sim_tick(double dt_s) {
  std::lock_guard lock(mu_);
  pull_actuators();
  plant::tick(plant_, dt_s, constants_);
  publish_sensors();
}

Pdu ModbusDevice::handle_pdu(std::uint8_t /*unit_id*/, const Pdu& request) {
  std::lock_guard lock(mu_);
  const std::uint8_t fc = function_of(request);

  if (const auto* r = std::get_if<ReadRequest>(&request)) {
    const bool bits = r->function == FunctionCode::read_coils || r->function == FunctionCode::read_discrete_inputs;
    const std::uint16_t max = bits ? kMaxReadBits : kMaxReadRegisters;
    if (r->quantity < 1 || r->quantity > max) return exception_for(fc, ExceptionCode::illegal_data_value);
    if (!range_ok(r->address, r->quantity)) return exception_for(fc, ExceptionCode::illegal_data_address);
    if (bits) {
      const auto& src = r->function == FunctionCode::read_coils ? bank_.coils : bank_.discrete;
      std::vector<bool> out(src.begin() + r->address, src.begin() + r->address + r->quantity);
      return ReadBitsResponse{r->function, pack_bits(out)};
    }
    const auto& src = r->function == FunctionCode::read_holding_registers ? bank_.holding : bank_.input;
    return ReadRegistersResponse{
        r->function, std::vector<std::uint16_t>(src.begin() + r->address, src.begin() + r->address + r->quantity)};
  }
  if (const auto* w = std::get_if<WriteSingleCoil>(&request)) {
    if (!range_ok(w->address, 1)) return exception_for(fc, ExceptionCode::illegal_data_address);
    bank_.coils[w->address] = w->value;
    return *w;
  }
  if (const auto* w = std::get_if<WriteSingleRegister>(&request)) {
    if (!range_ok(w->address, 1)) return exception_for(fc, ExceptionCode::illegal_data_address);
    bank_.holding[w->address] = w->value;
    return *w;
  }
  if (const auto* w = std::get_if<WriteMultipleCoils>(&request)) {
    if (!range_ok(w->address, static_cast<std::uint32_t>(w->values.size()))) {
      return exception_for(fc, ExceptionCode::illegal_data_address);
    }
    std::copy(w->values.begin(), w->values.end(), bank_.coils.begin() + w->address);
    return WriteMultipleResponse{FunctionCode::write_multiple_coils, w->address,
                                 static_cast<std::uint16_t>(w->values.size())};
  }
  if (const auto* w = std::get_if<WriteMultipleRegisters>(&request)) {
    if (!range_ok(w->address, static_cast<std::uint32_t>(w->values.size()))) {
      return exception_for(fc, ExceptionCode::illegal_data_address);
    }
    std::copy(w->values.begin(), w->values.end(), bank_.holding.begin() + w->address);
    return WriteMultipleResponse{FunctionCode::write_multiple_registers, w->address,
                                 static_cast<std::uint16_t>(w->values.size())};
  }
  if (const auto* m = std::get_if<MaskWriteRegister>(&request)) {
    if (!range_ok(m->address, 1)) return exception_for(fc, ExceptionCode::illegal_data_address);
    auto& reg = bank_.holding[m->address];
    reg = mask_write_result(reg, m->and_mask, m->or_mask);
    return *m;
  }
  if (const auto* d = std::get_if<ReadDeviceIdRequest>(&request)) {
    if (d->read_code != 0x01) return exception_for(fc, ExceptionCode::illegal_data_value);
    ReadDeviceIdResponse resp;
    resp.read_code = 0x01;
    resp.conformity = 0x01;
    resp.objects = {{0x00, identity_.vendor}, {0x01, identity_.product}, {0x02, identity_.revision}};
    return resp;
  }
  return exception_for(static_cast<std::uint8_t>(fc & 0x7F), ExceptionCode::illegal_function);
}

RegisterBank ModbusDevice::snapshot() const {
  std::lock_guard lock(mu_);
  return bank_;
}

plant::PlantState ModbusDevice::plant() const {
  std::lock_guard lock(mu_);
  return plant_;
}

void ModbusDevice::record_frame(const FrameLogEntry& entry) {
  std::lock_guard lock(mu_);
  log_.push_back(entry);
  if (log_file_.is_open()) {
    char fc[8];
    std::snprintf(fc, sizeof(fc), "0x%02X", entry.function);
    log_file_ << "txn=" << entry.transaction_id << " unit=" << int(entry.unit_id) << " fc=" << fc << '\n';
    log_file_.flush();
  }
}

std::vector<FrameLogEntry> ModbusDevice::frame_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

void ModbusDevice::set_frame_log_file(const std::string& path) {
  std::lock_guard lock(mu_);
  log_file_.open(path, std::ios::app);
}

ModbusMock::ModbusMock(MockOptions options)
    : options_(std::move(options)),
      server_(options_.bind, [this](const net::Fd& conn) { serve_connection(conn); }) {
  if (!options_.frame_log_path.empty()) device_.set_frame_log_file(options_.frame_log_path);
}

ModbusMock::~ModbusMock() { stop(); }

void ModbusMock::start() {
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
        device_.sim_tick(period.count());
      }
    });
  }
}

void ModbusMock::stop() {
  {
    std::lock_guard lock(sim_mu_);
    sim_stop_ = true;
  }
  sim_cv_.notify_all();
  if (sim_.joinable()) sim_.join();
  server_.stop();
}

void ModbusMock::serve_connection(const net::Fd& conn) {
  std::array<std::uint8_t, 260> frame{};
  for (;;) {
    std::span<std::uint8_t> header(frame.data(), kMbapHeaderSize);
    if (!net::recv_exact(conn, header)) return;
    std::size_t body = 0;
    try {
      body = body_length_from_header(header);
    } catch (const Failure&) {
      return;  // not Modbus; drop the connection
    }
    if (!net::recv_exact(conn, std::span<std::uint8_t>(frame.data() + kMbapHeaderSize, body))) return;
    const std::span<const std::uint8_t> whole(frame.data(), kMbapHeaderSize + body);
    const auto txn = static_cast<std::uint16_t>((frame[0] << 8) | frame[1]);
    const std::uint8_t unit = frame[6];
    const std::uint8_t fc = frame[7];

    Adu response{txn, unit, ExceptionResponse{}};
    try {
      Adu request = decode_adu(whole, Direction::request);
      device_.record_frame({txn, unit, fc});
      response.pdu = device_.handle_pdu(unit, request.pdu);
    } catch (const Failure&) {
      // Known function with a bad body is a data-value problem; anything else
      // is an unsupported function.
      const bool known = fc == 0x01 || fc == 0x02 || fc == 0x03 || fc == 0x04 || fc == 0x05 ||
                         fc == 0x06 || fc == 0x0F || fc == 0x10 || fc == 0x16 || fc == 0x2B;
      response.pdu = ExceptionResponse{static_cast<std::uint8_t>(fc & 0x7F),
                                       static_cast<std::uint8_t>(known ? ExceptionCode::illegal_data_value
                                                                       : ExceptionCode::illegal_function)};
    }
    net::send_all(conn, encode_adu(response));
  }
}

}  // namespace otmcp::modbus
