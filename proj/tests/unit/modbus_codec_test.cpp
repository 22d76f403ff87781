#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "otmcp/modbus/codec.hpp"
#include "otmcp/modbus/typed.hpp"

using namespace otmcp;
using namespace otmcp::modbus;

TEST(ModbusCodec, ReadHoldingFrameMatchesHandAssembly) {
  const auto bytes = encode_adu(Adu{1, 1, ReadRequest{FunctionCode::read_holding_registers, 0, 4}});
  const std::vector<std::uint8_t> expect{0x00, 0x01, 0x00, 0x00, 0x00, 0x06, 0x01, 0x03, 0x00, 0x00, 0x00, 0x04};
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(bytes, oracle::mbap_read(1, 1, 0x03, 0, 4));
}

TEST(ModbusCodec, ReadCoilsFrameLength) {
  const auto bytes = encode_adu(Adu{0, 0, ReadRequest{FunctionCode::read_coils, 0, 1}});
  ASSERT_EQ(bytes.size(), 12u);
  EXPECT_EQ(bytes[4], 0x00);
  EXPECT_EQ(bytes[5], 0x06);
  EXPECT_EQ(bytes, oracle::mbap_read(0, 0, 0x01, 0, 1));
}

TEST(ModbusCodec, QuantityLimitRejectedBeforeEncoding) {
  try {
    encode_adu(Adu{1, 1, ReadRequest{FunctionCode::read_holding_registers, 0, 126}});
    FAIL() << "expected invalid_input";
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::invalid_input);
  }
  EXPECT_NO_THROW(encode_adu(Adu{1, 1, ReadRequest{FunctionCode::read_holding_registers, 0, 125}}));
}

TEST(ModbusCodec, ExceptionResponseDecodes) {
  const std::vector<std::uint8_t> pdu{0x83, 0x02};
  const auto decoded = decode_pdu(pdu, Direction::response);
  ASSERT_TRUE(std::holds_alternative<ExceptionResponse>(decoded));
  EXPECT_EQ(std::get<ExceptionResponse>(decoded), (ExceptionResponse{0x03, 0x02}));
  EXPECT_EQ(exception_name(0x02), "illegal_data_address");
}

TEST(ModbusCodec, NonZeroProtocolIdIsProtocolError) {
  auto bytes = oracle::mbap_read(1, 1, 0x03, 0, 4);
  bytes[3] = 0x01;
  try {
    decode_adu(bytes, Direction::request);
    FAIL();
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::protocol_error);
  }
}

TEST(ModbusCodec, TruncatedAndUnknownFunctionAreProtocolErrors) {
  auto bytes = oracle::mbap_read(1, 1, 0x03, 0, 4);
  bytes.pop_back();
  EXPECT_THROW(decode_adu(bytes, Direction::request), Failure);
  auto unknown = oracle::mbap_read(1, 1, 0x41, 0, 4);
  EXPECT_THROW(decode_adu(unknown, Direction::request), Failure);
}

TEST(ModbusCodec, MaskWriteExamples) {
  EXPECT_EQ(mask_write_result(0x0012, 0x00F2, 0x0025), 0x0017);
  EXPECT_EQ(mask_write_result(0xBEEF, 0xFFFF, 0x1234), 0xBEEF);
  EXPECT_EQ(mask_write_result(0xBEEF, 0x0000, 0x1234), 0x1234);
  static_assert(mask_write_result(0x0012, 0x00F2, 0x0025) == 0x0017);
}

TEST(ModbusCodec, MaskWriteMatchesBitwiseBruteForceOnGrid) {
  for (int c = 0; c < 256; c += 3) {
    for (int a = 0; a < 256; a += 5) {
      for (int o = 0; o < 256; o += 7) {
        const auto cur = static_cast<std::uint16_t>(c), am = static_cast<std::uint16_t>(a),
                   om = static_cast<std::uint16_t>(o);
        ASSERT_EQ(mask_write_result(cur, am, om), oracle::mask_write(cur, am, om)) << c << ' ' << a << ' ' << o;
      }
    }
  }
}

TEST(ModbusCodec, Uint16ValidationBoundaries) {
  EXPECT_FALSE(validate_uint16(0).has_value());
  EXPECT_FALSE(validate_uint16(65535).has_value());
  auto over = validate_uint16(70000);
  ASSERT_TRUE(over.has_value());
  EXPECT_EQ(over->error_class, ErrorClass::range_overflow);
  EXPECT_EQ(over->details["value"], 70000);
  EXPECT_EQ(over->details["max"], 65535);
  EXPECT_TRUE(validate_uint16(-1).has_value());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5000; ++i) {
    const auto v = static_cast<std::int64_t>(rng() % 400000) - 200000;
    EXPECT_EQ(!validate_uint16(v).has_value(), v >= 0 && v <= 65535) << v;
  }
}

namespace {

Pdu random_request(std::mt19937& rng) {
  auto u16 = [&] { return static_cast<std::uint16_t>(rng()); };
  auto qty = [&](int max) { return static_cast<std::uint16_t>(1 + rng() % max); };
  switch (rng() % 7) {
    case 0: {
      const FunctionCode fcs[] = {FunctionCode::read_coils, FunctionCode::read_discrete_inputs,
                                  FunctionCode::read_holding_registers, FunctionCode::read_input_registers};
      const auto fc = fcs[rng() % 4];
      const bool bits = fc == FunctionCode::read_coils || fc == FunctionCode::read_discrete_inputs;
      return ReadRequest{fc, u16(), qty(bits ? kMaxReadBits : kMaxReadRegisters)};
    }
    case 1: return WriteSingleCoil{u16(), (rng() & 1) != 0};
    case 2: return WriteSingleRegister{u16(), u16()};
    case 3: {
      std::vector<bool> v(qty(kMaxWriteCoils));
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = rng() & 1;
      return WriteMultipleCoils{u16(), v};
    }
    case 4: {
      std::vector<std::uint16_t> v(qty(kMaxWriteRegisters));
      for (auto& w : v) w = u16();
      return WriteMultipleRegisters{u16(), v};
    }
    case 5: return MaskWriteRegister{u16(), u16(), u16()};
    default: return ReadDeviceIdRequest{};
  }
}

Pdu random_response(std::mt19937& rng) {
  auto u16 = [&] { return static_cast<std::uint16_t>(rng()); };
  switch (rng() % 8) {
    case 0: {
      std::vector<std::uint8_t> packed(1 + rng() % 250);
      for (auto& b : packed) b = static_cast<std::uint8_t>(rng());
      return ReadBitsResponse{(rng() & 1) ? FunctionCode::read_coils : FunctionCode::read_discrete_inputs, packed};
    }
    case 1: {
      std::vector<std::uint16_t> v(1 + rng() % kMaxReadRegisters);
      for (auto& w : v) w = u16();
      return ReadRegistersResponse{(rng() & 1) ? FunctionCode::read_holding_registers
                                               : FunctionCode::read_input_registers, v};
    }
    case 2: return WriteSingleRegister{u16(), u16()};
    case 3: return WriteSingleCoil{u16(), (rng() & 1) != 0};
    case 4:
      return WriteMultipleResponse{(rng() & 1) ? FunctionCode::write_multiple_coils
                                               : FunctionCode::write_multiple_registers,
                                   u16(), static_cast<std::uint16_t>(1 + rng() % kMaxWriteRegisters)};
    case 5: return MaskWriteRegister{u16(), u16(), u16()};
    case 6: {
      ReadDeviceIdResponse r;
      const int n = 1 + rng() % 3;
      for (int i = 0; i < n; ++i) r.objects.emplace_back(static_cast<std::uint8_t>(i), std::string(rng() % 40, 'a' + i));
      return r;
    }
    default: {
      const std::uint8_t fcs[] = {0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x0F, 0x10, 0x16};
      return ExceptionResponse{fcs[rng() % 9], static_cast<std::uint8_t>(1 + rng() % 4)};
    }
  }
}

}  // namespace

TEST(ModbusCodecProperty, AduRoundTripOverRandomValidFrames) {
  std::mt19937 rng(20240601);
  int checked = 0;
  for (int i = 0; i < 3000; ++i) {
    const bool req = i % 2 == 0;
    Adu adu{static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng()),
            req ? random_request(rng) : random_response(rng)};
    const auto bytes = encode_adu(adu);
    ASSERT_EQ(bytes.size(), kMbapHeaderSize + encode_pdu(adu.pdu).size() - 1 + 1);
    ASSERT_EQ((bytes[4] << 8 | bytes[5]), static_cast<int>(bytes.size() - 6));
    const auto back = decode_adu(bytes, req ? Direction::request : Direction::response);
    ASSERT_EQ(back, adu) << "iteration " << i;
    ++checked;
  }
  EXPECT_GE(checked, 1000);
}

TEST(ModbusCodec, PackBitsLsbFirst) {
  const std::vector<bool> bits{true, false, true, true, false, false, false, false, true};
  const auto packed = pack_bits(bits);
  ASSERT_EQ(packed.size(), 2u);
  EXPECT_EQ(packed[0], 0x0D);
  EXPECT_EQ(packed[1], 0x01);
  EXPECT_EQ(unpack_bits(packed, bits.size()), bits);
}

TEST(ModbusTyped, Float32UsesHighWordFirst) {
  const auto words = encode_typed(DataType::float32, 3.5);
  ASSERT_EQ(words.size(), 2u);
  const auto bits = oracle::float_bits(3.5f);
  EXPECT_EQ(words[0], bits >> 16);
  EXPECT_EQ(words[1], bits & 0xFFFF);
  EXPECT_EQ(words[0], 0x4060);
  EXPECT_EQ(words[1], 0x0000);
  EXPECT_EQ(decode_typed(DataType::float32, words).get<double>(), 3.5);
}

TEST(ModbusTyped, Uint32Composition) {
  const std::vector<std::uint16_t> w{0x0001, 0x0000};
  EXPECT_EQ(decode_typed(DataType::uint32, w).get<std::uint64_t>(), 65536u);
  EXPECT_EQ(encode_typed(DataType::uint32, 65536), w);
}

TEST(ModbusTyped, RangeAndTypeErrors) {
  auto cls = [](DataType t, const json& v) {
    try {
      encode_typed(t, v);
    } catch (const Failure& f) {
      return std::optional<ErrorClass>(f.error_class());
    }
    return std::optional<ErrorClass>();
  };
  EXPECT_EQ(cls(DataType::uint16, 65536), ErrorClass::range_overflow);
  EXPECT_EQ(cls(DataType::int16, -32769), ErrorClass::range_overflow);
  EXPECT_EQ(cls(DataType::int32, 3000000000LL), ErrorClass::range_overflow);
  EXPECT_EQ(cls(DataType::float32, "hello"), ErrorClass::type_mismatch);
  EXPECT_EQ(cls(DataType::uint16, 1.5), ErrorClass::type_mismatch);
  EXPECT_EQ(cls(DataType::boolean, 2), ErrorClass::type_mismatch);
  EXPECT_FALSE(cls(DataType::int16, -32768).has_value());
}

TEST(ModbusTyped, SignedRoundTrips) {
  std::mt19937 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto v16 = static_cast<std::int16_t>(rng());
    EXPECT_EQ(decode_typed(DataType::int16, encode_typed(DataType::int16, v16)).get<int>(), v16);
    const auto v32 = static_cast<std::int32_t>(rng());
    EXPECT_EQ(decode_typed(DataType::int32, encode_typed(DataType::int32, v32)).get<std::int64_t>(), v32);
  }
}

TEST(ModbusAliases, DefaultPlantMap) {
  const auto m = AliasMap::plant_default();
  const Alias* valve = m.find("valve_position");
  ASSERT_NE(valve, nullptr);
  EXPECT_EQ(valve->bank, Bank::holding);
  EXPECT_EQ(valve->address, 0);
  const Alias* count = m.find("production_count");
  ASSERT_NE(count, nullptr);
  EXPECT_EQ(count->bank, Bank::input);
  EXPECT_EQ(count->address, 8);
  EXPECT_EQ(m.find("xyz"), nullptr);
  EXPECT_EQ(m.group("sensors").size(), 9u);
}

TEST(ModbusAliases, FromJsonBothShapesAndValidation) {
  auto a = AliasMap::from_json(json::parse(R"({"aliases":[{"name":"sp","bank":"holding","address":20,"datatype":"float32"}]})"));
  ASSERT_NE(a.find("sp"), nullptr);
  EXPECT_EQ(a.find("sp")->datatype, DataType::float32);
  auto b = AliasMap::from_json(json::parse(R"({"pump":{"bank":"coil","address":0}})"));
  EXPECT_EQ(b.find("pump")->datatype, DataType::boolean);
  EXPECT_THROW(AliasMap::from_json(json::parse(R"({"x":{"bank":"holding","address":99,"datatype":"uint32"}})")),
               std::invalid_argument);
  EXPECT_THROW(AliasMap::from_json(json::parse(R"({"aliases":[{"name":"a","address":1},{"name":"a","address":2}]})")),
               std::invalid_argument);
}
