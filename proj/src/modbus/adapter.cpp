#include "otmcp/modbus/adapter.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <unistd.h>

#include "otmcp/env.hpp"

namespace otmcp::modbus {

namespace {

namespace args = mcp::args;
using mcp::ArgError;
using mcp::CallScope;

constexpr std::string_view kProtocol = "modbus";

std::uint16_t arg_address(const json& a, std::string_view key = "address") {
  const auto v = args::get_int(a, key);
  if (v < 0 || v > 65535) throw ArgError(std::string(key) + " must be within 0..65535");
  return static_cast<std::uint16_t>(v);
}

std::uint16_t arg_count(const json& a, std::uint16_t address, std::uint16_t max) {
  const auto v = args::opt_int(a, "count").value_or(1);
  if (v < 1 || v > max) throw ArgError("count must be within 1.." + std::to_string(max));
  if (address + v > 65536) throw ArgError("address + count exceeds the 16-bit address space");
  return static_cast<std::uint16_t>(v);
}

std::int64_t int_element(const json& v, std::size_t index) {
  if (v.is_number_integer() && !(v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX)) {
    return v.get<std::int64_t>();
  }
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() && std::fabs(v.get<double>()) < 9e18) {
    return static_cast<std::int64_t>(v.get<double>());
  }
  throw ArgError("values[" + std::to_string(index) + "] must be an integer");
}

DataType arg_datatype(const json& a) {
  const auto text = args::get_string(a, "datatype");
  auto t = parse_datatype(text);
  if (!t) throw ArgError("unknown datatype: " + text + " (uint16, int16, uint32, int32, float32, bool)");
  return *t;
}

json address_prop(const char* what) {
  return {{"type", "integer"}, {"minimum", 0}, {"maximum", 65535}, {"description", what}};
}

json count_prop(int max) {
  return {{"type", "integer"}, {"minimum", 1}, {"maximum", max}, {"default", 1}};
}

json datatype_prop() {
  return {{"type", "string"}, {"enum", {"uint16", "int16", "uint32", "int32", "float32", "bool"}}};
}

}  // namespace

AdapterConfig config_from_env() {
  AdapterConfig cfg;
  cfg.client.endpoint.host = env::get_or("MODBUS_HOST", "127.0.0.1");
  const double port = env::number("MODBUS_PORT", 1502);
  if (port < 1 || port > 65535 || port != std::floor(port)) {
    throw std::invalid_argument("MODBUS_PORT must be an integer in 1..65535");
  }
  cfg.client.endpoint.port = static_cast<std::uint16_t>(port);
  // Only explicit truthy text keeps writes on once the variable is set.
  if (env::get("MODBUS_WRITES_ENABLED")) cfg.writes_enabled = env::flag("MODBUS_WRITES_ENABLED", false);
  cfg.skip_uint16_check = env::flag("OTMCP_FAULT_SKIP_UINT16_CHECK", false);
  if (auto path = env::get("MODBUS_ALIAS_FILE"); path && !path->empty()) {
    cfg.aliases = AliasMap::load_file(*path);
  }
  return cfg;
}

Adapter::Adapter(AdapterConfig config)
    : config_(std::move(config)),
      client_(config_.client),
      registry_(std::string(kProtocol), [this] { return endpoint_uri(); }) {
  register_tools();
}

std::string Adapter::endpoint_uri() const { return "modbus://" + config_.client.endpoint.to_string(); }

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

  // Runs one request; exception responses become protocol_error failures.
  auto transact = [this](CallScope& scope, const Pdu& request) -> Pdu {
    try {
      auto reply = client_.transact(request);
      scope.set_attempts(reply.attempts);
      if (const auto* ex = std::get_if<ExceptionResponse>(&reply.pdu)) throw exception_failure(*ex);
      return std::move(reply.pdu);
    } catch (const Failure& f) {
      if (f.error_class() == ErrorClass::endpoint_unreachable || f.error_class() == ErrorClass::timeout) {
        scope.set_attempts(2);
      }
      throw;
    }
  };

  auto read_registers = [transact](CallScope& scope, FunctionCode fc, std::uint16_t address, std::uint16_t count) {
    Pdu pdu = transact(scope, ReadRequest{fc, address, count});
    const auto* r = std::get_if<ReadRegistersResponse>(&pdu);
    if (!r || r->values.size() != count) {
      throw Failure(ErrorClass::protocol_error, "unexpected response to register read");
    }
    return r->values;
  };

  auto read_bits = [transact](CallScope& scope, FunctionCode fc, std::uint16_t address, std::uint16_t count) {
    Pdu pdu = transact(scope, ReadRequest{fc, address, count});
    const auto* r = std::get_if<ReadBitsResponse>(&pdu);
    if (!r || r->packed.size() != (count + 7u) / 8u) {
      throw Failure(ErrorClass::protocol_error, "unexpected response to bit read");
    }
    return unpack_bits(r->packed, count);
  };

  auto require_writes = [this] {
    if (!config_.writes_enabled) {
      throw Failure(ErrorClass::writes_disabled, "writes are disabled for this adapter",
                    json{{"guard", "MODBUS_WRITES_ENABLED"}});
    }
  };

  auto checked_u16 = [this](std::int64_t v) -> std::uint16_t {
    if (!config_.skip_uint16_check) {
      if (auto err = validate_uint16(v)) throw Failure(err->error_class, err->message, err->details);
    }
    return static_cast<std::uint16_t>(v & 0xFFFF);
  };

  auto write_words = [transact](CallScope& scope, std::uint16_t address, const std::vector<std::uint16_t>& words) {
    if (words.size() == 1) {
      transact(scope, WriteSingleRegister{address, words[0]});
    } else {
      transact(scope, WriteMultipleRegisters{address, words});
    }
  };

  auto read_alias_value = [read_registers, read_bits](CallScope& scope, const Alias& al) -> json {
    json raw;
    switch (al.bank) {
      case Bank::holding:
      case Bank::input: {
        const auto fc = al.bank == Bank::holding ? FunctionCode::read_holding_registers
                                                  : FunctionCode::read_input_registers;
        const auto words = read_registers(scope, fc, al.address, static_cast<std::uint16_t>(word_count(al.datatype)));
        raw = decode_typed(al.datatype, words);
        break;
      }
      case Bank::coil:
      case Bank::discrete: {
        const auto fc = al.bank == Bank::coil ? FunctionCode::read_coils : FunctionCode::read_discrete_inputs;
        raw = static_cast<bool>(read_bits(scope, fc, al.address, 1).at(0));
        break;
      }
    }
    json value = raw;
    if (raw.is_number() && al.scale != 1.0) value = raw.get<double>() * al.scale;
    return json{{"alias", al.name}, {"bank", to_string(al.bank)}, {"address", al.address},
                {"datatype", to_string(al.datatype)}, {"raw", raw}, {"value", value}, {"unit", al.unit}};
  };

  auto find_alias = [this](const json& a) -> const Alias& {
    const auto name = args::get_string(a, "alias");
    const Alias* al = config_.aliases.find(name);
    if (!al) throw ArgError("unknown alias: " + name);
    return *al;
  };

  auto add = [this](std::string name, std::string description, json schema, mcp::ToolHandler handler) {
    registry_.add({std::move(name), std::move(description), std::move(schema)}, std::move(handler));
  };

  // --- connectivity -------------------------------------------------------
  add("ping", "Check that the Modbus device answers a request.", mcp::object_schema(json::object()),
      guarded([this, read_registers](CallScope& scope, const json&) {
        read_registers(scope, FunctionCode::read_holding_registers, 0, 1);
        return json{{"reachable", true}, {"endpoint", endpoint_uri()}, {"unit_id", config_.client.unit_id}};
      }));

  add("connection_status", "Report the adapter's connection state and counters without touching the device.",
      mcp::object_schema(json::object()), guarded([this](CallScope&, const json&) {
        const auto s = client_.status();
        return json{{"connected", s.connected},
                    {"endpoint", endpoint_uri()},
                    {"unit_id", config_.client.unit_id},
                    {"writes_enabled", config_.writes_enabled},
                    {"connects", s.connects},
                    {"reconnects", s.reconnects},
                    {"transactions", s.transactions},
                    {"last_error", s.last_error.empty() ? json(nullptr) : json(s.last_error)}};
      }));

  // --- reads ----------------------------------------------------------------
  auto register_read_tool = [&](const char* name, const char* kind, FunctionCode fc, const char* description) {
    add(name, description,
        mcp::object_schema({{"address", address_prop("first register")}, {"count", count_prop(kMaxReadRegisters)}},
                           {"address"}),
        guarded([read_registers, kind, fc](CallScope& scope, const json& a) {
          const auto address = arg_address(a);
          const auto count = arg_count(a, address, kMaxReadRegisters);
          const auto values = read_registers(scope, fc, address, count);
          return json{{"kind", kind}, {"address", address}, {"count", count}, {"values", values}};
        }));
  };
  register_read_tool("read_holding_registers", "holding", FunctionCode::read_holding_registers,
                     "Read consecutive holding registers.");
  register_read_tool("read_input_registers", "input", FunctionCode::read_input_registers,
                     "Read consecutive input registers.");

  auto register_bits_tool = [&](const char* name, const char* kind, FunctionCode fc, const char* description) {
    add(name, description,
        mcp::object_schema({{"address", address_prop("first bit")}, {"count", count_prop(kMaxReadBits)}},
                           {"address"}),
        guarded([read_bits, kind, fc](CallScope& scope, const json& a) {
          const auto address = arg_address(a);
          const auto count = arg_count(a, address, kMaxReadBits);
          json values = json::array();
          for (bool b : read_bits(scope, fc, address, count)) values.push_back(b);
          return json{{"kind", kind}, {"address", address}, {"count", count}, {"values", values}};
        }));
  };
  register_bits_tool("read_coils", "coil", FunctionCode::read_coils, "Read consecutive coils.");
  register_bits_tool("read_discrete_inputs", "discrete", FunctionCode::read_discrete_inputs,
                     "Read consecutive discrete inputs.");

  // --- writes ---------------------------------------------------------------
  add("write_register", "Write one holding register (0..65535).",
      mcp::object_schema({{"address", address_prop("register")}, {"value", {{"type", "integer"}}}},
                         {"address", "value"}),
      guarded([transact, require_writes, checked_u16](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const auto value = checked_u16(args::get_int(a, "value"));
        transact(scope, WriteSingleRegister{address, value});
        return json{{"address", address}, {"value", value}};
      }));

  add("write_registers", "Write consecutive holding registers.",
      mcp::object_schema({{"address", address_prop("first register")},
                          {"values", {{"type", "array"}, {"items", {{"type", "integer"}}}, {"minItems", 1},
                                      {"maxItems", kMaxWriteRegisters}}}},
                         {"address", "values"}),
      guarded([transact, require_writes, checked_u16](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const json& raw = args::get_array(a, "values");
        if (raw.empty() || raw.size() > kMaxWriteRegisters) {
          throw ArgError("values must hold 1.." + std::to_string(kMaxWriteRegisters) + " entries");
        }
        if (address + raw.size() > 65536) throw ArgError("address + count exceeds the 16-bit address space");
        std::vector<std::uint16_t> words;
        for (std::size_t i = 0; i < raw.size(); ++i) {
          words.push_back(checked_u16(int_element(raw[i], i)));
        }
        transact(scope, WriteMultipleRegisters{address, words});
        return json{{"address", address}, {"count", words.size()}, {"values", words}};
      }));

  add("write_coil", "Write one coil.",
      mcp::object_schema({{"address", address_prop("coil")}, {"value", {{"type", "boolean"}}}}, {"address", "value"}),
      guarded([transact, require_writes](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const bool value = args::get_bool(a, "value");
        transact(scope, WriteSingleCoil{address, value});
        return json{{"address", address}, {"value", value}};
      }));

  add("write_coils", "Write consecutive coils.",
      mcp::object_schema({{"address", address_prop("first coil")},
                          {"values", {{"type", "array"}, {"items", {{"type", "boolean"}}}, {"minItems", 1},
                                      {"maxItems", kMaxWriteCoils}}}},
                         {"address", "values"}),
      guarded([transact, require_writes](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const json& raw = args::get_array(a, "values");
        if (raw.empty() || raw.size() > kMaxWriteCoils) {
          throw ArgError("values must hold 1.." + std::to_string(kMaxWriteCoils) + " entries");
        }
        if (address + raw.size() > 65536) throw ArgError("address + count exceeds the 16-bit address space");
        std::vector<bool> bits;
        for (const auto& v : raw) {
          if (!v.is_boolean()) throw ArgError("values must be booleans");
          bits.push_back(v.get<bool>());
        }
        transact(scope, WriteMultipleCoils{address, bits});
        return json{{"address", address}, {"count", bits.size()}, {"values", raw}};
      }));

  add("mask_write_register", "Apply (current AND and_mask) OR (or_mask AND NOT and_mask) to a holding register.",
      mcp::object_schema({{"address", address_prop("register")},
                          {"and_mask", {{"type", "integer"}, {"minimum", 0}, {"maximum", 65535}}},
                          {"or_mask", {{"type", "integer"}, {"minimum", 0}, {"maximum", 65535}}}},
                         {"address", "and_mask", "or_mask"}),
      guarded([transact, require_writes, checked_u16](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const auto and_mask = checked_u16(args::get_int(a, "and_mask"));
        const auto or_mask = checked_u16(args::get_int(a, "or_mask"));
        transact(scope, MaskWriteRegister{address, and_mask, or_mask});
        return json{{"address", address}, {"and_mask", and_mask}, {"or_mask", or_mask}};
      }));

  add("write_register_verified", "Write one holding register and read it back.",
      mcp::object_schema({{"address", address_prop("register")}, {"value", {{"type", "integer"}}}},
                         {"address", "value"}),
      guarded([transact, read_registers, require_writes, checked_u16](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const auto value = checked_u16(args::get_int(a, "value"));
        transact(scope, WriteSingleRegister{address, value});
        const int write_attempts = scope.attempts();
        const auto back = read_registers(scope, FunctionCode::read_holding_registers, address, 1).at(0);
        scope.set_attempts(std::max(write_attempts, scope.attempts()));
        if (back != value) {
          throw Failure(ErrorClass::protocol_error, "readback does not match written value",
                        json{{"address", address}, {"written", value}, {"readback", back}});
        }
        return json{{"address", address}, {"value", value}, {"readback", back}, {"verified", true}};
      }));

  // --- typed ----------------------------------------------------------------
  add("read_typed", "Read a typed value from holding registers (32-bit types: high word first).",
      mcp::object_schema({{"address", address_prop("first register")}, {"datatype", datatype_prop()}},
                         {"address", "datatype"}),
      guarded([read_registers](CallScope& scope, const json& a) {
        const auto address = arg_address(a);
        const auto type = arg_datatype(a);
        const auto n = word_count(type);
        if (address + n > 65536) throw ArgError("value extends past the 16-bit address space");
        const auto words =
            read_registers(scope, FunctionCode::read_holding_registers, address, static_cast<std::uint16_t>(n));
        return json{{"address", address}, {"datatype", to_string(type)}, {"registers", words},
                    {"value", decode_typed(type, words)}};
      }));

  add("write_typed", "Write a typed value to holding registers (32-bit types: high word first).",
      mcp::object_schema({{"address", address_prop("first register")}, {"datatype", datatype_prop()},
                          {"value", json::object()}},
                         {"address", "datatype", "value"}),
      guarded([write_words, require_writes](CallScope& scope, const json& a) {
        require_writes();
        const auto address = arg_address(a);
        const auto type = arg_datatype(a);
        const auto words = encode_typed(type, args::get_value(a, "value"));
        if (address + words.size() > 65536) throw ArgError("value extends past the 16-bit address space");
        write_words(scope, address, words);
        return json{{"address", address}, {"datatype", to_string(type)}, {"registers", words},
                    {"value", decode_typed(type, words)}};
      }));

  // --- device information ---------------------------------------------------
  add("read_device_info", "Read the device identification strings (vendor, product, revision).",
      mcp::object_schema(json::object()), guarded([transact](CallScope& scope, const json&) {
        Pdu pdu = transact(scope, ReadDeviceIdRequest{});
        const auto* r = std::get_if<ReadDeviceIdResponse>(&pdu);
        if (!r) throw Failure(ErrorClass::protocol_error, "unexpected response to device identification");
        json out = json::object();
        for (const auto& [id, text] : r->objects) {
          switch (id) {
            case 0x00: out["vendor"] = text; break;
            case 0x01: out["product"] = text; break;
            case 0x02: out["revision"] = text; break;
            default: out["object_" + std::to_string(id)] = text; break;
          }
        }
        return out;
      }));

  // --- aliases --------------------------------------------------------------
  add("list_aliases", "List named points with their bank, address, type, scale and group.",
      mcp::object_schema(json::object()), guarded([this](CallScope&, const json&) {
        json list = json::array();
        for (const auto& al : config_.aliases.all()) list.push_back(al.to_json());
        return json{{"aliases", list}, {"groups", config_.aliases.groups()}, {"count", list.size()}};
      }));

  add("read_alias", "Read a named point; scaled points also report the physical value.",
      mcp::object_schema({{"alias", {{"type", "string"}}}}, {"alias"}),
      guarded([find_alias, read_alias_value](CallScope& scope, const json& a) {
        return read_alias_value(scope, find_alias(a));
      }));

  add("write_alias", "Write a named holding register or coil; the value is in physical units.",
      mcp::object_schema({{"alias", {{"type", "string"}}}, {"value", json::object()}}, {"alias", "value"}),
      guarded([find_alias, require_writes, write_words, transact](CallScope& scope, const json& a) {
        require_writes();
        const Alias& al = find_alias(a);
        if (!is_writable(al.bank)) throw ArgError("alias " + al.name + " is read-only");
        const json& value = args::get_value(a, "value");
        json raw = value;
        if (al.datatype != DataType::boolean && al.scale != 1.0) {
          if (!value.is_number()) {
            throw Failure(ErrorClass::type_mismatch, "alias " + al.name + " expects a number",
                          json{{"alias", al.name}, {"value", value}});
          }
          const double scaled = std::round(value.get<double>() / al.scale);
          raw = al.datatype == DataType::float32 ? json(value.get<double>() / al.scale)
                                                  : json(static_cast<std::int64_t>(scaled));
        }
        const auto words = encode_typed(al.datatype, raw);
        if (al.bank == Bank::coil) {
          transact(scope, WriteSingleCoil{al.address, words[0] != 0});
        } else {
          write_words(scope, al.address, words);
        }
        return json{{"alias", al.name}, {"bank", to_string(al.bank)}, {"address", al.address},
                    {"raw", decode_typed(al.datatype, words)}, {"value", value}};
      }));

  add("read_register_block", "Read every named point of an alias group in as few requests as possible.",
      mcp::object_schema({{"group", {{"type", "string"}}}}, {"group"}),
      guarded([this, read_registers, read_bits](CallScope& scope, const json& a) {
        const auto group = args::get_string(a, "group");
        const auto members = config_.aliases.group(group);
        if (members.empty()) throw ArgError("unknown alias group: " + group);

        std::map<Bank, std::pair<std::uint32_t, std::uint32_t>> spans;  // bank -> [lo, hi)
        for (const Alias* al : members) {
          const std::uint32_t lo = al->address;
          const std::uint32_t hi = lo + static_cast<std::uint32_t>(word_count(al->datatype));
          auto [it, fresh] = spans.try_emplace(al->bank, lo, hi);
          if (!fresh) {
            it->second.first = std::min(it->second.first, lo);
            it->second.second = std::max(it->second.second, hi);
          }
        }
        std::map<Bank, std::vector<std::uint16_t>> words;
        std::map<Bank, std::vector<bool>> bits;
        int reads = 0;
        int attempts = 1;
        for (const auto& [bank, span] : spans) {
          const auto lo = static_cast<std::uint16_t>(span.first);
          const auto n = span.second - span.first;
          if (n > (is_bit_bank(bank) ? kMaxReadBits : kMaxReadRegisters)) {
            throw ArgError("group " + group + " spans too many addresses for one request");
          }
          const auto count = static_cast<std::uint16_t>(n);
          switch (bank) {
            case Bank::holding: words[bank] = read_registers(scope, FunctionCode::read_holding_registers, lo, count); break;
            case Bank::input: words[bank] = read_registers(scope, FunctionCode::read_input_registers, lo, count); break;
            case Bank::coil: bits[bank] = read_bits(scope, FunctionCode::read_coils, lo, count); break;
            case Bank::discrete: bits[bank] = read_bits(scope, FunctionCode::read_discrete_inputs, lo, count); break;
          }
          attempts = std::max(attempts, scope.attempts());
          ++reads;
        }
        scope.set_attempts(attempts);
        json values = json::object();
        for (const Alias* al : members) {
          const std::size_t off = al->address - spans.at(al->bank).first;
          json raw;
          if (is_bit_bank(al->bank)) {
            raw = static_cast<bool>(bits.at(al->bank).at(off));
          } else {
            const auto& w = words.at(al->bank);
            raw = decode_typed(al->datatype, std::span<const std::uint16_t>(w.data() + off, word_count(al->datatype)));
          }
          values[al->name] = raw.is_number() && al->scale != 1.0 ? json(raw.get<double>() * al->scale) : raw;
        }
        return json{{"group", group}, {"values", values}, {"requests", reads}};
      }));

  // --- health ---------------------------------------------------------------
  add("health_check", "Connectivity check plus one sensor read.", mcp::object_schema(json::object()),
      guarded([this, read_registers](CallScope& scope, const json&) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto values = read_registers(scope, FunctionCode::read_input_registers, 0, 1);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const auto s = client_.status();
        return json{{"healthy", true},
                    {"endpoint", endpoint_uri()},
                    {"writes_enabled", config_.writes_enabled},
                    {"round_trip_ms", ms},
                    {"sample", {{"address", 0}, {"value", values.at(0)}}},
                    {"reconnects", s.reconnects}};
      }));
}

int run_stdio_server() {
  std::unique_ptr<Adapter> adapter;
  try {
    adapter = std::make_unique<Adapter>(config_from_env());
  } catch (const std::exception& e) {
    std::cerr << "modbus adapter: " << e.what() << '\n';
    return 2;
  }
  mcp::serve(adapter->registry(), mcp::ServerInfo{"otmcp-modbus"}, STDIN_FILENO, STDOUT_FILENO);
  return 0;
}

}  // namespace otmcp::modbus
