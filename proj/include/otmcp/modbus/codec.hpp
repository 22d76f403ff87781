#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "otmcp/envelope.hpp"

namespace otmcp::modbus {

enum class FunctionCode : std::uint8_t {
  read_coils = 0x01,
  read_discrete_inputs = 0x02,
  read_holding_registers = 0x03,
  read_input_registers = 0x04,
  write_single_coil = 0x05,
  write_single_register = 0x06,
  write_multiple_coils = 0x0F,
  write_multiple_registers = 0x10,
  mask_write_register = 0x16,
  encapsulated_interface = 0x2B,  // MEI 0x0E: read device identification
};

enum class ExceptionCode : std::uint8_t {
  illegal_function = 0x01,
  illegal_data_address = 0x02,
  illegal_data_value = 0x03,
  server_device_failure = 0x04,
};

std::string exception_name(std::uint8_t code);

inline constexpr std::uint16_t kMaxReadRegisters = 125;
inline constexpr std::uint16_t kMaxReadBits = 2000;
inline constexpr std::uint16_t kMaxWriteRegisters = 123;
inline constexpr std::uint16_t kMaxWriteCoils = 1968;
inline constexpr std::uint8_t kMeiDeviceId = 0x0E;

/// FC 01-04 request.
struct ReadRequest {
  FunctionCode function = FunctionCode::read_holding_registers;
  std::uint16_t address = 0;
  std::uint16_t quantity = 0;
  bool operator==(const ReadRequest&) const = default;
};

/// FC 01/02 response; bits packed LSB-first as on the wire.
struct ReadBitsResponse {
  FunctionCode function = FunctionCode::read_coils;
  std::vector<std::uint8_t> packed;
  bool operator==(const ReadBitsResponse&) const = default;
};

/// FC 03/04 response.
struct ReadRegistersResponse {
  FunctionCode function = FunctionCode::read_holding_registers;
  std::vector<std::uint16_t> values;
  bool operator==(const ReadRegistersResponse&) const = default;
};

/// FC 05 request and its echo response.
struct WriteSingleCoil {
  std::uint16_t address = 0;
  bool value = false;
  bool operator==(const WriteSingleCoil&) const = default;
};

/// FC 06 request and its echo response.
struct WriteSingleRegister {
  std::uint16_t address = 0;
  std::uint16_t value = 0;
  bool operator==(const WriteSingleRegister&) const = default;
};

struct WriteMultipleCoils {
  std::uint16_t address = 0;
  std::vector<bool> values;
  bool operator==(const WriteMultipleCoils&) const = default;
};

struct WriteMultipleRegisters {
  std::uint16_t address = 0;
  std::vector<std::uint16_t> values;
  bool operator==(const WriteMultipleRegisters&) const = default;
};

/// FC 0F/10 response.
struct WriteMultipleResponse {
  FunctionCode function = FunctionCode::write_multiple_registers;
  std::uint16_t address = 0;
  std::uint16_t quantity = 0;
  bool operator==(const WriteMultipleResponse&) const = default;
};

/// FC 16 request and its echo response.
struct MaskWriteRegister {
  std::uint16_t address = 0;
  std::uint16_t and_mask = 0;
  std::uint16_t or_mask = 0;
  bool operator==(const MaskWriteRegister&) const = default;
};

struct ReadDeviceIdRequest {
  std::uint8_t read_code = 0x01;  // basic identification
  std::uint8_t object_id = 0x00;
  bool operator==(const ReadDeviceIdRequest&) const = default;
};

struct ReadDeviceIdResponse {
  std::uint8_t read_code = 0x01;
  std::uint8_t conformity = 0x01;
  std::vector<std::pair<std::uint8_t, std::string>> objects;
  bool operator==(const ReadDeviceIdResponse&) const = default;
};

struct ExceptionResponse {
  std::uint8_t function = 0;  // request function code, without the 0x80 bit
  std::uint8_t code = 0;
  bool operator==(const ExceptionResponse&) const = default;
};

using Pdu = std::variant<ReadRequest, ReadBitsResponse, ReadRegistersResponse, WriteSingleCoil,
                         WriteSingleRegister, WriteMultipleCoils, WriteMultipleRegisters,
                         WriteMultipleResponse, MaskWriteRegister, ReadDeviceIdRequest,
                         ReadDeviceIdResponse, ExceptionResponse>;

enum class Direction { request, response };

/// MBAP-framed application data unit. The protocol id is always 0 and the
/// length field is derived from the PDU, so neither is stored.
struct Adu {
  std::uint16_t transaction_id = 0;
  std::uint8_t unit_id = 1;
  Pdu pdu;
  bool operator==(const Adu&) const = default;
};

inline constexpr std::size_t kMbapHeaderSize = 7;

/// Throws Failure(invalid_input) when a quantity or value breaks protocol limits.
std::vector<std::uint8_t> encode_pdu(const Pdu& pdu);
std::vector<std::uint8_t> encode_adu(const Adu& adu);

/// Throws Failure(protocol_error) on malformed input.
Pdu decode_pdu(std::span<const std::uint8_t> bytes, Direction direction);
Adu decode_adu(std::span<const std::uint8_t> bytes, Direction direction);

/// Bytes following the 7-byte MBAP header, from the header's length field.
/// Throws Failure(protocol_error) on a bad protocol id or length.
std::size_t body_length_from_header(std::span<const std::uint8_t> header);

/// Function code carried by a PDU (the request code for exceptions).
std::uint8_t function_of(const Pdu& pdu);
bool is_write_function(std::uint8_t function);

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits);
std::vector<bool> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count);

/// (current AND and_mask) OR (or_mask AND NOT and_mask).
constexpr std::uint16_t mask_write_result(std::uint16_t current, std::uint16_t and_mask,
                                          std::uint16_t or_mask) noexcept {
  return static_cast<std::uint16_t>((current & and_mask) | (or_mask & ~and_mask));
}

inline constexpr std::int64_t kUint16Max = 65535;

/// nullopt when 0 <= value <= 65535, else a range_overflow error.
std::optional<ErrorInfo> validate_uint16(std::int64_t value);

}  // namespace otmcp::modbus
