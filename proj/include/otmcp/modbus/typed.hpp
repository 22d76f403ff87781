#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otmcp/envelope.hpp"

namespace otmcp::modbus {

enum class DataType { uint16, int16, uint32, int32, float32, boolean };

std::string_view to_string(DataType t) noexcept;
/// Accepts the names above, with "bool" as the spelling for boolean.
std::optional<DataType> parse_datatype(std::string_view text) noexcept;
std::size_t word_count(DataType t) noexcept;

/// Encodes a JSON value into holding-register words. Two-word types put the
/// high word first. Throws Failure(type_mismatch) for a value of the wrong
/// JSON kind and Failure(range_overflow) when it does not fit the type.
std::vector<std::uint16_t> encode_typed(DataType t, const json& value);

/// Inverse of encode_typed. `words` must hold exactly word_count(t) entries.
json decode_typed(DataType t, std::span<const std::uint16_t> words);

enum class Bank { holding, input, coil, discrete };

std::string_view to_string(Bank b) noexcept;
std::optional<Bank> parse_bank(std::string_view text) noexcept;
inline bool is_writable(Bank b) noexcept { return b == Bank::holding || b == Bank::coil; }
inline bool is_bit_bank(Bank b) noexcept { return b == Bank::coil || b == Bank::discrete; }

struct Alias {
  std::string name;
  Bank bank = Bank::holding;
  std::uint16_t address = 0;
  DataType datatype = DataType::uint16;
  double scale = 1.0;  // physical = raw * scale
  std::string group;
  std::string unit;

  json to_json() const;
};

class AliasMap {
 public:
  explicit AliasMap(std::size_t bank_size = 100) : bank_size_(bank_size) {}

  /// Throws std::invalid_argument for a duplicate name, a bit bank with a
  /// non-boolean type, or an address range outside the bank.
  void add(Alias alias);

  const Alias* find(std::string_view name) const;
  const std::vector<Alias>& all() const noexcept { return aliases_; }
  std::vector<std::string> groups() const;
  std::vector<const Alias*> group(std::string_view name) const;

  /// Named points of the mock plant: actuators, sensors (x0.1 scale),
  /// switches and status bits.
  static AliasMap plant_default();

  /// Either {"aliases":[{name, bank, address, datatype, scale?, group?, unit?}]}
  /// or an object keyed by alias name with the same fields.
  static AliasMap from_json(const json& doc, std::size_t bank_size = 100);
  static AliasMap load_file(const std::string& path, std::size_t bank_size = 100);

 private:
  std::size_t bank_size_;
  std::vector<Alias> aliases_;
};

}  // namespace otmcp::modbus
