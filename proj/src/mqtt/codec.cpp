#include "otmcp/mqtt/codec.hpp"

#include <array>

namespace otmcp::mqtt {

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Failure(ErrorClass::protocol_error, "malformed MQTT packet: " + what);
}

[[noreturn]] void invalid(const std::string& what) {
  throw Failure(ErrorClass::invalid_input, "cannot encode MQTT packet: " + what);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
  if (s.size() > 65535) invalid("string longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((b_[pos_] << 8) | b_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    const auto n = u16();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string rest() {
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), b_.size() - pos_);
    pos_ = b_.size();
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) malformed("truncated body");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

struct Encoder {
  std::uint8_t header = 0;
  std::vector<std::uint8_t> body;

  void operator()(const Connect& p) {
    header = 0x10;
    put_string(body, "MQTT");
    body.push_back(4);  // protocol level 3.1.1
    body.push_back(p.clean_session ? 0x02 : 0x00);
    put_u16(body, p.keep_alive_s);
    put_string(body, p.client_id);
  }
  void operator()(const Connack& p) {
    header = 0x20;
    body = {static_cast<std::uint8_t>(p.session_present ? 1 : 0), p.return_code};
  }
  void operator()(const Publish& p) {
    if (p.qos > 1) invalid("qos " + std::to_string(p.qos) + " outside the supported subset");
    if (p.qos == 0 && p.packet_id) invalid("qos 0 publish cannot carry a packet id");
    if (p.qos == 1 && (!p.packet_id || *p.packet_id == 0)) invalid("qos 1 publish needs a non-zero packet id");
    if (p.qos == 0 && p.dup) invalid("qos 0 publish cannot set dup");
    header = static_cast<std::uint8_t>(0x30 | (p.dup ? 0x08 : 0) | (p.qos << 1) | (p.retain ? 1 : 0));
    put_string(body, p.topic);
    if (p.packet_id) put_u16(body, *p.packet_id);
    body.insert(body.end(), p.payload.begin(), p.payload.end());
  }
  void operator()(const Puback& p) {
    header = 0x40;
    put_u16(body, p.packet_id);
  }
  void operator()(const Subscribe& p) {
    if (p.filters.empty()) invalid("subscribe without filters");
    header = 0x82;
    put_u16(body, p.packet_id);
    for (const auto& [f, q] : p.filters) {
      if (q > 2) invalid("requested qos above 2");
      put_string(body, f);
      body.push_back(q);
    }
  }
  void operator()(const Suback& p) {
    if (p.granted.empty()) invalid("suback without return codes");
    header = 0x90;
    put_u16(body, p.packet_id);
    body.insert(body.end(), p.granted.begin(), p.granted.end());
  }
  void operator()(const Unsubscribe& p) {
    if (p.filters.empty()) invalid("unsubscribe without filters");
    header = 0xA2;
    put_u16(body, p.packet_id);
    for (const auto& f : p.filters) put_string(body, f);
  }
  void operator()(const Unsuback& p) {
    header = 0xB0;
    put_u16(body, p.packet_id);
  }
  void operator()(const Pingreq&) { header = 0xC0; }
  void operator()(const Pingresp&) { header = 0xD0; }
  void operator()(const Disconnect&) { header = 0xE0; }
};

Packet decode_body(std::uint8_t header, std::span<const std::uint8_t> body) {
  const auto type = static_cast<std::uint8_t>(header >> 4);
  const std::uint8_t flags = header & 0x0F;
  Reader r(body);
  auto expect_flags = [&](std::uint8_t want) {
    if (flags != want) malformed("reserved header flags");
  };
  auto finish = [&](Packet p) {
    if (!r.done()) malformed("trailing bytes");
    return p;
  };
  switch (static_cast<PacketType>(type)) {
    case PacketType::connect: {
      expect_flags(0);
      if (r.str() != "MQTT") malformed("protocol name");
      if (r.u8() != 4) malformed("protocol level");
      const auto cflags = r.u8();
      if (cflags & 0x01) malformed("reserved connect flag");
      if (cflags & 0xFC) malformed("will and credentials are not supported");
      Connect c;
      c.clean_session = (cflags & 0x02) != 0;
      c.keep_alive_s = r.u16();
      c.client_id = r.str();
      return finish(c);
    }
    case PacketType::connack: {
      expect_flags(0);
      Connack c;
      const auto ack = r.u8();
      if (ack & 0xFE) malformed("connack flags");
      c.session_present = ack & 1;
      c.return_code = r.u8();
      return finish(c);
    }
    case PacketType::publish: {
      Publish p;
      p.dup = flags & 0x08;
      p.qos = static_cast<std::uint8_t>((flags >> 1) & 0x03);
      p.retain = flags & 0x01;
      if (p.qos > 1) malformed("qos " + std::to_string(p.qos) + " publish");
      if (p.qos == 0 && p.dup) malformed("dup on qos 0");
      p.topic = r.str();
      if (p.qos > 0) {
        p.packet_id = r.u16();
        if (*p.packet_id == 0) malformed("packet id 0");
      }
      p.payload = r.rest();
      return p;
    }
    case PacketType::puback: {
      expect_flags(0);
      return finish(Puback{r.u16()});
    }
    case PacketType::subscribe: {
      expect_flags(2);
      Subscribe s;
      s.packet_id = r.u16();
      while (!r.done()) {
        auto f = r.str();
        const auto q = r.u8();
        if (q > 2) malformed("requested qos");
        s.filters.emplace_back(std::move(f), q);
      }
      if (s.filters.empty()) malformed("subscribe without filters");
      return s;
    }
    case PacketType::suback: {
      expect_flags(0);
      Suback s;
      s.packet_id = r.u16();
      while (!r.done()) {
        const auto g = r.u8();
        if (g > 2 && g != kSubackFailure) malformed("suback return code");
        s.granted.push_back(g);
      }
      if (s.granted.empty()) malformed("suback without return codes");
      return s;
    }
    case PacketType::unsubscribe: {
      expect_flags(2);
      Unsubscribe u;
      u.packet_id = r.u16();
      while (!r.done()) u.filters.push_back(r.str());
      if (u.filters.empty()) malformed("unsubscribe without filters");
      return u;
    }
    case PacketType::unsuback:
      expect_flags(0);
      return finish(Unsuback{r.u16()});
    case PacketType::pingreq:
      expect_flags(0);
      return finish(Pingreq{});
    case PacketType::pingresp:
      expect_flags(0);
      return finish(Pingresp{});
    case PacketType::disconnect:
      expect_flags(0);
      return finish(Disconnect{});
  }
  malformed("unsupported packet type " + std::to_string(type));
}

std::vector<std::string_view> split_levels(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto end = s.find('/', start);
    if (end == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
}

bool has_wildcard(std::string_view s) {
  return s.find('+') != std::string_view::npos || s.find('#') != std::string_view::npos;
}

}  // namespace

PacketType type_of(const Packet& p) noexcept {
  return std::visit(
      [](const auto& v) -> PacketType {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Connect>) return PacketType::connect;
        if constexpr (std::is_same_v<T, Connack>) return PacketType::connack;
        if constexpr (std::is_same_v<T, Publish>) return PacketType::publish;
        if constexpr (std::is_same_v<T, Puback>) return PacketType::puback;
        if constexpr (std::is_same_v<T, Subscribe>) return PacketType::subscribe;
        if constexpr (std::is_same_v<T, Suback>) return PacketType::suback;
        if constexpr (std::is_same_v<T, Unsubscribe>) return PacketType::unsubscribe;
        if constexpr (std::is_same_v<T, Unsuback>) return PacketType::unsuback;
        if constexpr (std::is_same_v<T, Pingreq>) return PacketType::pingreq;
        if constexpr (std::is_same_v<T, Pingresp>) return PacketType::pingresp;
        return PacketType::disconnect;
      },
      p);
}

std::vector<std::uint8_t> encode_remaining_length(std::uint32_t n) {
  if (n > kMaxRemainingLength) invalid("remaining length above 268435455");
  std::vector<std::uint8_t> out;
  do {
    auto byte = static_cast<std::uint8_t>(n % 128);
    n /= 128;
    if (n > 0) byte |= 0x80;
    out.push_back(byte);
  } while (n > 0);
  return out;
}

std::pair<std::uint32_t, std::size_t> decode_remaining_length(std::span<const std::uint8_t> bytes) {
  std::uint32_t value = 0;
  std::uint32_t multiplier = 1;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i >= bytes.size()) malformed("truncated remaining length");
    const auto b = bytes[i];
    value += (b & 0x7F) * multiplier;
    if ((b & 0x80) == 0) {
      if (i > 0 && b == 0) malformed("non-minimal remaining length");
      return {value, i + 1};
    }
    multiplier *= 128;
  }
  malformed("remaining length longer than 4 bytes");
}

std::vector<std::uint8_t> encode_packet(const Packet& p) {
  Encoder e;
  std::visit(e, p);
  std::vector<std::uint8_t> out{e.header};
  const auto len = encode_remaining_length(static_cast<std::uint32_t>(e.body.size()));
  out.insert(out.end(), len.begin(), len.end());
  out.insert(out.end(), e.body.begin(), e.body.end());
  return out;
}

Packet decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) malformed("empty input");
  const auto [len, used] = decode_remaining_length(bytes.subspan(1));
  if (1 + used + len != bytes.size()) malformed("length field does not match input size");
  return decode_body(bytes[0], bytes.subspan(1 + used));
}

std::optional<Packet> read_packet(const net::Fd& sock, std::uint32_t max_remaining) {
  std::array<std::uint8_t, 1> header{};
  if (!net::recv_exact(sock, header)) return std::nullopt;
  std::array<std::uint8_t, 4> lenbuf{};
  std::size_t n = 0;
  for (;;) {
    if (n == 4) malformed("remaining length longer than 4 bytes");
    if (!net::recv_exact(sock, std::span<std::uint8_t>(lenbuf.data() + n, 1))) {
      throw net::NetError("connection closed mid-packet");
    }
    if ((lenbuf[n++] & 0x80) == 0) break;
  }
  const auto [len, used] = decode_remaining_length(std::span<const std::uint8_t>(lenbuf.data(), n));
  (void)used;
  if (len > max_remaining) malformed("packet larger than " + std::to_string(max_remaining) + " bytes");
  std::vector<std::uint8_t> body(len);
  if (len > 0 && !net::recv_exact(sock, body)) throw net::NetError("connection closed mid-packet");
  return decode_body(header[0], body);
}

bool topic_matches(std::string_view filter, std::string_view topic) noexcept {
  if (!topic.empty() && topic.front() == '$' && !filter.empty() && (filter.front() == '+' || filter.front() == '#')) {
    return false;
  }
  const auto fl = split_levels(filter);
  const auto tl = split_levels(topic);
  std::size_t i = 0;
  for (; i < fl.size(); ++i) {
    if (fl[i] == "#") return true;
    if (i >= tl.size()) return false;
    if (fl[i] != "+" && fl[i] != tl[i]) return false;
  }
  return i == tl.size();
}

std::optional<std::string> filter_problem(std::string_view filter) {
  if (filter.empty()) return "topic filter must be non-empty";
  if (filter.size() > 65535) return "topic filter longer than 65535 bytes";
  if (filter.find('\0') != std::string_view::npos) return "topic filter contains a NUL character";
  std::size_t start = 0;
  for (;;) {
    const auto end = std::min(filter.find('/', start), filter.size());
    const auto level = filter.substr(start, end - start);
    if (level.find('#') != std::string_view::npos) {
      if (level != "#") return "'#' must occupy a whole level";
      if (end != filter.size()) return "'#' must be the last level";
    }
    if (level.find('+') != std::string_view::npos && level != "+") return "'+' must occupy a whole level";
    if (end == filter.size()) break;
    start = end + 1;
  }
  return std::nullopt;
}

std::optional<std::string> topic_problem(std::string_view topic) {
  if (topic.empty()) return "topic must be non-empty";
  if (topic.size() > 65535) return "topic longer than 65535 bytes";
  if (has_wildcard(topic)) return "publish topic must not contain wildcards";
  if (topic.find('\0') != std::string_view::npos) return "topic contains a NUL character";
  return std::nullopt;
}

std::optional<ErrorInfo> validate_publish(std::string_view topic, std::int64_t qos) {
  if (auto why = topic_problem(topic)) {
    return ErrorInfo{ErrorClass::invalid_input, *why, json{{"topic", topic}}};
  }
  if (qos == 2) {
    return ErrorInfo{ErrorClass::invalid_input, "qos 2 is not supported by this adapter (use 0 or 1)",
                     json{{"qos", qos}, {"supported", {0, 1}}}};
  }
  if (qos != 0 && qos != 1) {
    return ErrorInfo{ErrorClass::invalid_input, "qos must be 0 or 1, got " + std::to_string(qos),
                     json{{"qos", qos}, {"supported", {0, 1}}}};
  }
  return std::nullopt;
}

std::optional<ErrorInfo> validate_subscribe(std::string_view filter, std::int64_t qos) {
  if (auto why = filter_problem(filter)) {
    return ErrorInfo{ErrorClass::invalid_input, *why, json{{"topic_filter", filter}}};
  }
  if (qos == 2) {
    return ErrorInfo{ErrorClass::invalid_input, "qos 2 is not supported by this adapter (use 0 or 1)",
                     json{{"qos", qos}, {"supported", {0, 1}}}};
  }
  if (qos != 0 && qos != 1) {
    return ErrorInfo{ErrorClass::invalid_input, "qos must be 0 or 1, got " + std::to_string(qos),
                     json{{"qos", qos}, {"supported", {0, 1}}}};
  }
  return std::nullopt;
}

}  // namespace otmcp::mqtt
