#include "otmcp/modbus/typed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "otmcp/modbus/mock.hpp"

namespace otmcp::modbus {

namespace {

[[noreturn]] void mismatch(DataType t, const json& value) {
  throw Failure(ErrorClass::type_mismatch,
                "value " + dump_json(value) + " is not a valid " + std::string(to_string(t)),
                json{{"datatype", to_string(t)}, {"value", value}});
}

std::int64_t integral(DataType t, const json& value, std::int64_t lo, std::int64_t hi) {
  std::int64_t v = 0;
  if (value.is_number_integer()) {
    if (value.is_number_unsigned() && value.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
      throw Failure(ErrorClass::range_overflow, "value " + value.dump() + " exceeds " + std::string(to_string(t)),
                    json{{"value", value}, {"min", lo}, {"max", hi}});
    }
    v = value.get<std::int64_t>();
  } else if (value.is_number_float()) {
    const double d = value.get<double>();
    if (d != std::floor(d)) mismatch(t, value);
    if (d < static_cast<double>(lo) || d > static_cast<double>(hi)) {
      throw Failure(ErrorClass::range_overflow, "value " + value.dump() + " out of range for " + std::string(to_string(t)),
                    json{{"value", value}, {"min", lo}, {"max", hi}});
    }
    v = static_cast<std::int64_t>(d);
  } else {
    mismatch(t, value);
  }
  if (v < lo || v > hi) {
    throw Failure(ErrorClass::range_overflow,
                  "value " + std::to_string(v) + " out of range for " + std::string(to_string(t)),
                  json{{"value", v}, {"min", lo}, {"max", hi}});
  }
  return v;
}

std::vector<std::uint16_t> split32(std::uint32_t bits) {
  return {static_cast<std::uint16_t>(bits >> 16), static_cast<std::uint16_t>(bits & 0xFFFF)};
}

std::uint32_t join32(std::span<const std::uint16_t> w) {
  return (static_cast<std::uint32_t>(w[0]) << 16) | w[1];
}

}  // namespace

std::string_view to_string(DataType t) noexcept {
  switch (t) {
    case DataType::uint16: return "uint16";
    case DataType::int16: return "int16";
    case DataType::uint32: return "uint32";
    case DataType::int32: return "int32";
    case DataType::float32: return "float32";
    case DataType::boolean: return "bool";
  }
  return "uint16";
}

std::optional<DataType> parse_datatype(std::string_view text) noexcept {
  if (text == "uint16") return DataType::uint16;
  if (text == "int16") return DataType::int16;
  if (text == "uint32") return DataType::uint32;
  if (text == "int32") return DataType::int32;
  if (text == "float32") return DataType::float32;
  if (text == "bool" || text == "boolean") return DataType::boolean;
  return std::nullopt;
}

std::size_t word_count(DataType t) noexcept {
  return t == DataType::uint32 || t == DataType::int32 || t == DataType::float32 ? 2 : 1;
}

std::vector<std::uint16_t> encode_typed(DataType t, const json& value) {
  switch (t) {
    case DataType::uint16:
      return {static_cast<std::uint16_t>(integral(t, value, 0, 65535))};
    case DataType::int16:
      return {static_cast<std::uint16_t>(static_cast<std::int16_t>(integral(t, value, -32768, 32767)))};
    case DataType::uint32:
      return split32(static_cast<std::uint32_t>(integral(t, value, 0, 4294967295LL)));
    case DataType::int32:
      return split32(static_cast<std::uint32_t>(
          static_cast<std::int32_t>(integral(t, value, std::numeric_limits<std::int32_t>::min(),
                                             std::numeric_limits<std::int32_t>::max()))));
    case DataType::float32: {
      if (!value.is_number()) mismatch(t, value);
      const double d = value.get<double>();
      if (std::isfinite(d) && std::fabs(d) > std::numeric_limits<float>::max()) {
        throw Failure(ErrorClass::range_overflow, "value " + value.dump() + " exceeds float32 range",
                      json{{"value", value}, {"max", std::numeric_limits<float>::max()}});
      }
      return split32(std::bit_cast<std::uint32_t>(static_cast<float>(d)));
    }
    case DataType::boolean:
      if (value.is_boolean()) return {static_cast<std::uint16_t>(value.get<bool>() ? 1 : 0)};
      if (value.is_number_integer() && (value.get<std::int64_t>() == 0 || value.get<std::int64_t>() == 1)) {
        return {static_cast<std::uint16_t>(value.get<std::int64_t>())};
      }
      mismatch(t, value);
  }
  mismatch(t, value);
}

json decode_typed(DataType t, std::span<const std::uint16_t> words) {
  if (words.size() != word_count(t)) {
    throw std::invalid_argument("decode_typed: expected " + std::to_string(word_count(t)) + " words");
  }
  switch (t) {
    case DataType::uint16: return words[0];
    case DataType::int16: return static_cast<std::int16_t>(words[0]);
    case DataType::uint32: return join32(words);
    case DataType::int32: return static_cast<std::int32_t>(join32(words));
    case DataType::float32: return static_cast<double>(std::bit_cast<float>(join32(words)));
    case DataType::boolean: return words[0] != 0;
  }
  return nullptr;
}

std::string_view to_string(Bank b) noexcept {
  switch (b) {
    case Bank::holding: return "holding";
    case Bank::input: return "input";
    case Bank::coil: return "coil";
    case Bank::discrete: return "discrete";
  }
  return "holding";
}

std::optional<Bank> parse_bank(std::string_view text) noexcept {
  if (text == "holding") return Bank::holding;
  if (text == "input") return Bank::input;
  if (text == "coil" || text == "coils") return Bank::coil;
  if (text == "discrete") return Bank::discrete;
  return std::nullopt;
}

json Alias::to_json() const {
  return json{{"name", name},  {"bank", to_string(bank)}, {"address", address}, {"datatype", to_string(datatype)},
              {"scale", scale}, {"group", group},          {"unit", unit}};
}

void AliasMap::add(Alias alias) {
  if (alias.name.empty()) throw std::invalid_argument("alias name is empty");
  if (find(alias.name)) throw std::invalid_argument("duplicate alias: " + alias.name);
  if (is_bit_bank(alias.bank) && alias.datatype != DataType::boolean) {
    throw std::invalid_argument("alias " + alias.name + ": bit banks hold bool values only");
  }
  if (alias.address + word_count(alias.datatype) > bank_size_) {
    throw std::invalid_argument("alias " + alias.name + ": address outside bank");
  }
  if (!(alias.scale > 0.0)) throw std::invalid_argument("alias " + alias.name + ": scale must be positive");
  aliases_.push_back(std::move(alias));
}

const Alias* AliasMap::find(std::string_view name) const {
  for (const auto& a : aliases_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::vector<std::string> AliasMap::groups() const {
  std::vector<std::string> out;
  for (const auto& a : aliases_) {
    if (!a.group.empty() && std::find(out.begin(), out.end(), a.group) == out.end()) out.push_back(a.group);
  }
  return out;
}

std::vector<const Alias*> AliasMap::group(std::string_view name) const {
  std::vector<const Alias*> out;
  for (const auto& a : aliases_) {
    if (a.group == name) out.push_back(&a);
  }
  return out;
}

AliasMap AliasMap::plant_default() {
  namespace pm = plant_map;
  AliasMap m(kBankSize);
  const double s = 1.0 / kSensorScale;
  auto holding = [&](const char* n, std::uint16_t addr, const char* unit) {
    m.add({n, Bank::holding, addr, DataType::uint16, 1.0, "actuators", unit});
  };
  holding("valve_position", pm::valve_position, "%");
  holding("heater_power", pm::heater_power, "%");
  holding("fan_speed", pm::fan_speed, "rpm");
  holding("conveyor_speed", pm::conveyor_speed, "mm/s");
  holding("command_word", pm::command_word, "");
  auto sensor = [&](const char* n, std::uint16_t addr, double scale, const char* unit) {
    m.add({n, Bank::input, addr, DataType::uint16, scale, "sensors", unit});
  };
  sensor("temperature", pm::temperature, s, "degC");
  sensor("pressure", pm::pressure, s, "kPa");
  sensor("flow_rate", pm::flow_rate, s, "l/min");
  sensor("tank_level", pm::tank_level, s, "%");
  sensor("vibration", pm::vibration, s, "mm/s");
  sensor("ph", pm::ph, s, "pH");
  sensor("humidity", pm::humidity, s, "%");
  sensor("motor_speed", pm::motor_speed, s, "rpm");
  sensor("production_count", pm::production_count, 1.0, "count");
  m.add({"pump_running", Bank::coil, pm::pump_running, DataType::boolean, 1.0, "switches", ""});
  m.add({"emergency_stop", Bank::coil, pm::emergency_stop, DataType::boolean, 1.0, "switches", ""});
  m.add({"pump_feedback", Bank::discrete, pm::pump_feedback, DataType::boolean, 1.0, "status", ""});
  m.add({"high_temp_alarm", Bank::discrete, pm::high_temp_alarm, DataType::boolean, 1.0, "status", ""});
  return m;
}

namespace {

Alias alias_from(const std::string& name, const json& j) {
  if (!j.is_object()) throw std::invalid_argument("alias " + name + ": entry must be an object");
  Alias a;
  a.name = name;
  auto bank = parse_bank(j.value("bank", std::string("holding")));
  if (!bank) throw std::invalid_argument("alias " + name + ": unknown bank");
  a.bank = *bank;
  const auto addr = j.value("address", std::int64_t{-1});
  if (addr < 0 || addr > 65535) throw std::invalid_argument("alias " + name + ": address must be 0..65535");
  a.address = static_cast<std::uint16_t>(addr);
  auto dt = parse_datatype(j.value("datatype", std::string(is_bit_bank(a.bank) ? "bool" : "uint16")));
  if (!dt) throw std::invalid_argument("alias " + name + ": unknown datatype");
  a.datatype = *dt;
  a.scale = j.value("scale", 1.0);
  a.group = j.value("group", std::string());
  a.unit = j.value("unit", std::string());
  return a;
}

}  // namespace

AliasMap AliasMap::from_json(const json& doc, std::size_t bank_size) {
  AliasMap m(bank_size);
  if (doc.is_object() && doc.contains("aliases") && doc.at("aliases").is_array()) {
    for (const auto& e : doc.at("aliases")) {
      if (!e.is_object() || !e.contains("name") || !e.at("name").is_string()) {
        throw std::invalid_argument("alias entry without a name");
      }
      m.add(alias_from(e.at("name").get<std::string>(), e));
    }
  } else if (doc.is_object()) {
    for (const auto& [name, e] : doc.items()) m.add(alias_from(name, e));
  } else {
    throw std::invalid_argument("alias map must be a JSON object");
  }
  return m;
}

AliasMap AliasMap::load_file(const std::string& path, std::size_t bank_size) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open alias file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("alias file " + path + ": " + e.what());
  }
  return from_json(doc, bank_size);
}

}  // namespace otmcp::modbus
