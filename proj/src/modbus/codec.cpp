#include "otmcp/modbus/codec.hpp"

namespace otmcp::modbus {

namespace {

[[noreturn]] void bad_input(const std::string& msg, json details = {}) {
  throw Failure(ErrorClass::invalid_input, msg, std::move(details));
}

[[noreturn]] void malformed(const std::string& msg) {
  throw Failure(ErrorClass::protocol_error, "malformed Modbus frame: " + msg);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    auto v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void finish() const {
    if (pos_ != bytes_.size()) malformed("trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) malformed("truncated PDU");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool is_bit_read(FunctionCode fc) {
  return fc == FunctionCode::read_coils || fc == FunctionCode::read_discrete_inputs;
}

bool is_register_read(FunctionCode fc) {
  return fc == FunctionCode::read_holding_registers || fc == FunctionCode::read_input_registers;
}

void check_read_quantity(FunctionCode fc, std::uint16_t qty) {
  const std::uint16_t max = is_bit_read(fc) ? kMaxReadBits : kMaxReadRegisters;
  if (qty < 1 || qty > max) {
    bad_input("read quantity " + std::to_string(qty) + " outside 1.." + std::to_string(max),
              {{"quantity", qty}, {"max", max}});
  }
}

struct Encoder {
  std::vector<std::uint8_t>& out;

  void operator()(const ReadRequest& r) {
    if (!is_bit_read(r.function) && !is_register_read(r.function)) bad_input("not a read function");
    check_read_quantity(r.function, r.quantity);
    out.push_back(static_cast<std::uint8_t>(r.function));
    put16(out, r.address);
    put16(out, r.quantity);
  }
  void operator()(const ReadBitsResponse& r) {
    if (!is_bit_read(r.function)) bad_input("not a bit-read function");
    if (r.packed.empty() || r.packed.size() > 250) bad_input("bit response byte count out of range");
    out.push_back(static_cast<std::uint8_t>(r.function));
    out.push_back(static_cast<std::uint8_t>(r.packed.size()));
    out.insert(out.end(), r.packed.begin(), r.packed.end());
  }
  void operator()(const ReadRegistersResponse& r) {
    if (!is_register_read(r.function)) bad_input("not a register-read function");
    if (r.values.empty() || r.values.size() > kMaxReadRegisters) bad_input("register count out of range");
    out.push_back(static_cast<std::uint8_t>(r.function));
    out.push_back(static_cast<std::uint8_t>(r.values.size() * 2));
    for (auto v : r.values) put16(out, v);
  }
  void operator()(const WriteSingleCoil& r) {
    out.push_back(static_cast<std::uint8_t>(FunctionCode::write_single_coil));
    put16(out, r.address);
    put16(out, r.value ? 0xFF00 : 0x0000);
  }
  void operator()(const WriteSingleRegister& r) {
    out.push_back(static_cast<std::uint8_t>(FunctionCode::write_single_register));
    put16(out, r.address);
    put16(out, r.value);
  }
  void operator()(const WriteMultipleCoils& r) {
    if (r.values.empty() || r.values.size() > kMaxWriteCoils) {
      bad_input("coil write quantity out of range", {{"quantity", r.values.size()}});
    }
    auto packed = pack_bits(r.values);
    out.push_back(static_cast<std::uint8_t>(FunctionCode::write_multiple_coils));
    put16(out, r.address);
    put16(out, static_cast<std::uint16_t>(r.values.size()));
    out.push_back(static_cast<std::uint8_t>(packed.size()));
    out.insert(out.end(), packed.begin(), packed.end());
  }
  void operator()(const WriteMultipleRegisters& r) {
    if (r.values.empty() || r.values.size() > kMaxWriteRegisters) {
      bad_input("register write quantity out of range", {{"quantity", r.values.size()}});
    }
    out.push_back(static_cast<std::uint8_t>(FunctionCode::write_multiple_registers));
    put16(out, r.address);
    put16(out, static_cast<std::uint16_t>(r.values.size()));
    out.push_back(static_cast<std::uint8_t>(r.values.size() * 2));
    for (auto v : r.values) put16(out, v);
  }
  void operator()(const WriteMultipleResponse& r) {
    if (r.function != FunctionCode::write_multiple_coils &&
        r.function != FunctionCode::write_multiple_registers) {
      bad_input("not a multiple-write function");
    }
    out.push_back(static_cast<std::uint8_t>(r.function));
    put16(out, r.address);
    put16(out, r.quantity);
  }
  void operator()(const MaskWriteRegister& r) {
    out.push_back(static_cast<std::uint8_t>(FunctionCode::mask_write_register));
    put16(out, r.address);
    put16(out, r.and_mask);
    put16(out, r.or_mask);
  }
  void operator()(const ReadDeviceIdRequest& r) {
    out.push_back(static_cast<std::uint8_t>(FunctionCode::encapsulated_interface));
    out.push_back(kMeiDeviceId);
    out.push_back(r.read_code);
    out.push_back(r.object_id);
  }
  void operator()(const ReadDeviceIdResponse& r) {
    if (r.objects.size() > 255) bad_input("too many device id objects");
    out.push_back(static_cast<std::uint8_t>(FunctionCode::encapsulated_interface));
    out.push_back(kMeiDeviceId);
    out.push_back(r.read_code);
    out.push_back(r.conformity);
    out.push_back(0x00);  // more follows: no
    out.push_back(0x00);  // next object id
    out.push_back(static_cast<std::uint8_t>(r.objects.size()));
    for (const auto& [id, text] : r.objects) {
      if (text.size() > 245) bad_input("device id object too long");
      out.push_back(id);
      out.push_back(static_cast<std::uint8_t>(text.size()));
      out.insert(out.end(), text.begin(), text.end());
    }
  }
  void operator()(const ExceptionResponse& r) {
    if (r.function & 0x80) bad_input("exception function must be the request code");
    out.push_back(static_cast<std::uint8_t>(r.function | 0x80));
    out.push_back(r.code);
  }
};

Pdu decode_request(Reader& in, std::uint8_t fc) {
  switch (static_cast<FunctionCode>(fc)) {
    case FunctionCode::read_coils:
    case FunctionCode::read_discrete_inputs:
    case FunctionCode::read_holding_registers:
    case FunctionCode::read_input_registers: {
      ReadRequest r{static_cast<FunctionCode>(fc), in.u16(), in.u16()};
      return r;
    }
    case FunctionCode::write_single_coil: {
      WriteSingleCoil r;
      r.address = in.u16();
      const auto raw = in.u16();
      if (raw != 0xFF00 && raw != 0x0000) malformed("coil value must be 0xFF00 or 0x0000");
      r.value = raw == 0xFF00;
      return r;
    }
    case FunctionCode::write_single_register:
      return WriteSingleRegister{in.u16(), in.u16()};
    case FunctionCode::write_multiple_coils: {
      WriteMultipleCoils r;
      r.address = in.u16();
      const auto qty = in.u16();
      const auto count = in.u8();
      if (qty < 1 || qty > kMaxWriteCoils || count != (qty + 7) / 8) malformed("coil byte count mismatch");
      r.values = unpack_bits(in.take(count), qty);
      return r;
    }
    case FunctionCode::write_multiple_registers: {
      WriteMultipleRegisters r;
      r.address = in.u16();
      const auto qty = in.u16();
      const auto count = in.u8();
      if (qty < 1 || qty > kMaxWriteRegisters || count != qty * 2) malformed("register byte count mismatch");
      for (std::uint16_t i = 0; i < qty; ++i) r.values.push_back(in.u16());
      return r;
    }
    case FunctionCode::mask_write_register:
      return MaskWriteRegister{in.u16(), in.u16(), in.u16()};
    case FunctionCode::encapsulated_interface: {
      if (in.u8() != kMeiDeviceId) malformed("unsupported MEI type");
      ReadDeviceIdRequest r;
      r.read_code = in.u8();
      r.object_id = in.u8();
      return r;
    }
  }
  malformed("unknown function code " + std::to_string(fc));
}

Pdu decode_response(Reader& in, std::uint8_t fc) {
  if (fc & 0x80) {
    ExceptionResponse r;
    r.function = static_cast<std::uint8_t>(fc & 0x7F);
    r.code = in.u8();
    return r;
  }
  switch (static_cast<FunctionCode>(fc)) {
    case FunctionCode::read_coils:
    case FunctionCode::read_discrete_inputs: {
      ReadBitsResponse r;
      r.function = static_cast<FunctionCode>(fc);
      const auto count = in.u8();
      if (count == 0) malformed("empty bit response");
      auto bytes = in.take(count);
      r.packed.assign(bytes.begin(), bytes.end());
      return r;
    }
    case FunctionCode::read_holding_registers:
    case FunctionCode::read_input_registers: {
      ReadRegistersResponse r;
      r.function = static_cast<FunctionCode>(fc);
      const auto count = in.u8();
      if (count == 0 || count % 2 != 0) malformed("odd register byte count");
      for (int i = 0; i < count / 2; ++i) r.values.push_back(in.u16());
      return r;
    }
    case FunctionCode::write_single_coil:
    case FunctionCode::write_single_register:
    case FunctionCode::mask_write_register:
      return decode_request(in, fc);  // echo of the request
    case FunctionCode::write_multiple_coils:
    case FunctionCode::write_multiple_registers:
      return WriteMultipleResponse{static_cast<FunctionCode>(fc), in.u16(), in.u16()};
    case FunctionCode::encapsulated_interface: {
      if (in.u8() != kMeiDeviceId) malformed("unsupported MEI type");
      ReadDeviceIdResponse r;
      r.read_code = in.u8();
      r.conformity = in.u8();
      in.u8();  // more follows
      in.u8();  // next object id
      const auto n = in.u8();
      for (int i = 0; i < n; ++i) {
        const auto id = in.u8();
        const auto len = in.u8();
        auto text = in.take(len);
        r.objects.emplace_back(id, std::string(text.begin(), text.end()));
      }
      return r;
    }
  }
  malformed("unknown function code " + std::to_string(fc));
}

}  // namespace

std::string exception_name(std::uint8_t code) {
  switch (code) {
    case 0x01: return "illegal_function";
    case 0x02: return "illegal_data_address";
    case 0x03: return "illegal_data_value";
    case 0x04: return "server_device_failure";
    default: return "exception_" + std::to_string(code);
  }
}

std::vector<std::uint8_t> encode_pdu(const Pdu& pdu) {
  std::vector<std::uint8_t> out;
  std::visit(Encoder{out}, pdu);
  return out;
}

std::vector<std::uint8_t> encode_adu(const Adu& adu) {
  const auto pdu = encode_pdu(adu.pdu);
  std::vector<std::uint8_t> out;
  out.reserve(kMbapHeaderSize + pdu.size());
  put16(out, adu.transaction_id);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(pdu.size() + 1));
  out.push_back(adu.unit_id);
  out.insert(out.end(), pdu.begin(), pdu.end());
  return out;
}

Pdu decode_pdu(std::span<const std::uint8_t> bytes, Direction direction) {
  Reader in(bytes);
  const auto fc = in.u8();
  Pdu pdu = direction == Direction::request ? decode_request(in, fc) : decode_response(in, fc);
  in.finish();
  return pdu;
}

std::size_t body_length_from_header(std::span<const std::uint8_t> header) {
  if (header.size() < kMbapHeaderSize) malformed("short MBAP header");
  const auto protocol = static_cast<std::uint16_t>((header[2] << 8) | header[3]);
  if (protocol != 0) malformed("protocol id " + std::to_string(protocol) + " is not Modbus");
  const auto length = static_cast<std::uint16_t>((header[4] << 8) | header[5]);
  if (length < 2 || length > 254) malformed("length field " + std::to_string(length) + " out of range");
  return static_cast<std::size_t>(length - 1);
}

Adu decode_adu(std::span<const std::uint8_t> bytes, Direction direction) {
  const auto body = body_length_from_header(bytes);
  if (bytes.size() != kMbapHeaderSize + body) malformed("frame length does not match MBAP length");
  Adu adu;
  adu.transaction_id = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
  adu.unit_id = bytes[6];
  adu.pdu = decode_pdu(bytes.subspan(kMbapHeaderSize), direction);
  return adu;
}

std::uint8_t function_of(const Pdu& pdu) {
  struct V {
    std::uint8_t operator()(const ReadRequest& r) const { return static_cast<std::uint8_t>(r.function); }
    std::uint8_t operator()(const ReadBitsResponse& r) const { return static_cast<std::uint8_t>(r.function); }
    std::uint8_t operator()(const ReadRegistersResponse& r) const { return static_cast<std::uint8_t>(r.function); }
    std::uint8_t operator()(const WriteSingleCoil&) const { return 0x05; }
    std::uint8_t operator()(const WriteSingleRegister&) const { return 0x06; }
    std::uint8_t operator()(const WriteMultipleCoils&) const { return 0x0F; }
    std::uint8_t operator()(const WriteMultipleRegisters&) const { return 0x10; }
    std::uint8_t operator()(const WriteMultipleResponse& r) const { return static_cast<std::uint8_t>(r.function); }
    std::uint8_t operator()(const MaskWriteRegister&) const { return 0x16; }
    std::uint8_t operator()(const ReadDeviceIdRequest&) const { return 0x2B; }
    std::uint8_t operator()(const ReadDeviceIdResponse&) const { return 0x2B; }
    std::uint8_t operator()(const ExceptionResponse& r) const { return r.function; }
  };
  return std::visit(V{}, pdu);
}

bool is_write_function(std::uint8_t function) {
  switch (function) {
    case 0x05:
    case 0x06:
    case 0x0F:
    case 0x10:
    case 0x16:
      return true;
    default:
      return false;
  }
}

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (1u << (i % 8)));
  }
  return out;
}

std::vector<bool> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
  std::vector<bool> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count && i / 8 < packed.size(); ++i) {
    out.push_back((packed[i / 8] >> (i % 8)) & 1u);
  }
  return out;
}

std::optional<ErrorInfo> validate_uint16(std::int64_t value) {
  if (value >= 0 && value <= kUint16Max) return std::nullopt;
  std::string msg = value < 0 ? "value " + std::to_string(value) + " is below uint16 minimum 0"
                              : "value " + std::to_string(value) + " exceeds uint16 maximum 65535";
  return ErrorInfo{ErrorClass::range_overflow, std::move(msg),
                   {{"value", value}, {"min", 0}, {"max", kUint16Max}}};
}

}  // namespace otmcp::modbus
