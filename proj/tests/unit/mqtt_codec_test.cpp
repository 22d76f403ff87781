#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "otmcp/mqtt/codec.hpp"

using namespace otmcp;
using namespace otmcp::mqtt;

TEST(MqttCodec, RemainingLength321) {
  const std::vector<std::uint8_t> expect{0xC1, 0x02};
  EXPECT_EQ(encode_remaining_length(321), expect);
  EXPECT_EQ(oracle::leb128(321), expect);
  EXPECT_EQ(decode_remaining_length(expect), std::make_pair(321u, std::size_t{2}));
}

TEST(MqttCodec, RemainingLengthBoundaries) {
  for (std::uint32_t n : {0u, 127u, 128u, 16383u, 16384u, 2097151u, 2097152u, kMaxRemainingLength}) {
    const auto bytes = encode_remaining_length(n);
    EXPECT_EQ(bytes, oracle::leb128(n)) << n;
    EXPECT_EQ(decode_remaining_length(bytes).first, n);
  }
  EXPECT_THROW(encode_remaining_length(kMaxRemainingLength + 1), Failure);
}

TEST(MqttCodec, RemainingLengthMalformed) {
  const std::vector<std::uint8_t> five{0xFF, 0xFF, 0xFF, 0xFF, 0x7F};
  const std::vector<std::uint8_t> truncated{0x80};
  for (const auto& bytes : {five, truncated}) {
    try {
      decode_remaining_length(bytes);
      FAIL();
    } catch (const Failure& f) {
      EXPECT_EQ(f.error_class(), ErrorClass::protocol_error);
    }
  }
}

TEST(MqttCodec, PingreqFixedHeader) {
  const std::vector<std::uint8_t> expect{0xC0, 0x00};
  EXPECT_EQ(encode_packet(Pingreq{}), expect);
  EXPECT_EQ(encode_packet(Pingresp{}), (std::vector<std::uint8_t>{0xD0, 0x00}));
  EXPECT_EQ(encode_packet(Disconnect{}), (std::vector<std::uint8_t>{0xE0, 0x00}));
}

TEST(MqttCodec, PublishQos0RoundTrip) {
  const Packet p = Publish{"a/b", "x", 0, false, false, std::nullopt};
  const auto bytes = encode_packet(p);
  const std::vector<std::uint8_t> expect{0x30, 0x06, 0x00, 0x03, 'a', '/', 'b', 'x'};
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(decode_packet(bytes), p);
}

TEST(MqttCodec, ConnectBytes) {
  const auto bytes = encode_packet(Connect{"c1", 60, true});
  const std::vector<std::uint8_t> expect{0x10, 0x0E, 0x00, 0x04, 'M', 'Q', 'T', 'T', 0x04,
                                         0x02, 0x00, 0x3C, 0x00, 0x02, 'c', '1'};
  EXPECT_EQ(bytes, expect);
}

TEST(MqttCodec, TruncatedBodyIsProtocolError) {
  auto bytes = encode_packet(Subscribe{7, {{"a/#", 1}}});
  bytes.pop_back();
  bytes[1] = static_cast<std::uint8_t>(bytes.size() - 2);
  try {
    decode_packet(bytes);
    FAIL();
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::protocol_error);
  }
}

TEST(MqttCodec, Qos2PublishRejected) {
  EXPECT_THROW(encode_packet(Publish{"t", "", 2, false, false, 1}), Failure);
  const std::vector<std::uint8_t> wire{0x34, 0x05, 0x00, 0x01, 't', 0x00, 0x01};
  EXPECT_THROW(decode_packet(wire), Failure);
}

namespace {

std::string random_text(std::mt19937& rng, std::size_t max_len, bool topic) {
  std::uniform_int_distribution<std::size_t> len(topic ? 1 : 0, max_len);
  std::uniform_int_distribution<int> ch(0, 255);
  const std::string alpha = "abcxyz/019";
  std::uniform_int_distribution<std::size_t> pick(0, alpha.size() - 1);
  std::string s(len(rng), 'a');
  for (auto& c : s) c = topic ? alpha[pick(rng)] : static_cast<char>(ch(rng));
  return s;
}

Packet random_packet(std::mt19937& rng) {
  std::uniform_int_distribution<int> kind(0, 10);
  std::uniform_int_distribution<int> id(1, 65535);
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_int_distribution<int> count(1, 4);
  const auto pid = static_cast<std::uint16_t>(id(rng));
  switch (kind(rng)) {
    case 0:
      return Connect{random_text(rng, 20, true), static_cast<std::uint16_t>(id(rng)), bit(rng) == 1};
    case 1:
      return Connack{bit(rng) == 1, static_cast<std::uint8_t>(bit(rng) * 5)};
    case 2: {
      const auto qos = static_cast<std::uint8_t>(bit(rng));
      const bool dup = qos == 1 && bit(rng) == 1;
      return Publish{random_text(rng, 30, true), random_text(rng, 300, false), qos, bit(rng) == 1, dup,
                     qos == 1 ? std::optional<std::uint16_t>(pid) : std::nullopt};
    }
    case 3:
      return Puback{pid};
    case 4: {
      Subscribe s{pid, {}};
      for (int i = count(rng); i > 0; --i) s.filters.emplace_back(random_text(rng, 12, true), bit(rng));
      return s;
    }
    case 5: {
      Suback s{pid, {}};
      for (int i = count(rng); i > 0; --i) s.granted.push_back(bit(rng) ? 1 : kSubackFailure);
      return s;
    }
    case 6: {
      Unsubscribe u{pid, {}};
      for (int i = count(rng); i > 0; --i) u.filters.push_back(random_text(rng, 12, true));
      return u;
    }
    case 7:
      return Unsuback{pid};
    case 8:
      return Pingreq{};
    case 9:
      return Pingresp{};
    default:
      return Disconnect{};
  }
}

}  // namespace

TEST(MqttCodec, RandomPacketsRoundTrip) {
  std::mt19937 rng(1883);
  for (int i = 0; i < 3000; ++i) {
    const auto p = random_packet(rng);
    const auto bytes = encode_packet(p);
    ASSERT_EQ(decode_packet(bytes), p) << "iteration " << i;
  }
}

TEST(MqttTopics, ExamplesFromTheToolManifest) {
  EXPECT_TRUE(topic_matches("sensors/#", "sensors/line1/temp"));
  EXPECT_FALSE(topic_matches("a/+", "a/b/c"));
  EXPECT_TRUE(topic_matches("sensors/#", "sensors"));
  EXPECT_TRUE(topic_matches("#", "a/b"));
  EXPECT_FALSE(topic_matches("#", "$SYS/x"));
  EXPECT_TRUE(topic_matches("+/+", "/a"));
}

namespace {

void all_strings(const std::vector<std::string>& alphabet, int depth, std::vector<std::string>& out) {
  std::vector<std::string> current{""};
  for (int d = 1; d <= depth; ++d) {
    std::vector<std::string> next;
    for (const auto& prefix : current) {
      for (const auto& level : alphabet) {
        next.push_back(prefix.empty() && d == 1 ? level : prefix + "/" + level);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    current = std::move(next);
  }
}

}  // namespace

TEST(MqttTopics, ExhaustiveSmallDomainMatchesOracle) {
  std::vector<std::string> topics;
  all_strings({"a", "b"}, 4, topics);
  std::vector<std::string> raw_filters;
  all_strings({"a", "b", "+", "#"}, 4, raw_filters);
  std::vector<std::string> filters;
  for (const auto& f : raw_filters) {
    if (!filter_problem(f)) filters.push_back(f);
  }
  ASSERT_GT(filters.size(), 100u);
  std::size_t checked = 0;
  for (const auto& f : filters) {
    for (const auto& t : topics) {
      ASSERT_EQ(topic_matches(f, t), oracle::topic_match(f, t)) << f << " vs " << t;
      ++checked;
    }
  }
  EXPECT_EQ(checked, filters.size() * topics.size());
}

TEST(MqttTopics, FilterValidation) {
  EXPECT_FALSE(filter_problem("a/#"));
  EXPECT_FALSE(filter_problem("+/b/+"));
  EXPECT_TRUE(filter_problem("a/#/b"));
  EXPECT_TRUE(filter_problem("a/b#"));
  EXPECT_TRUE(filter_problem("a+/b"));
  EXPECT_TRUE(filter_problem(""));
}

TEST(MqttValidation, PublishRules) {
  auto empty = validate_publish("", 0);
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->error_class, ErrorClass::invalid_input);

  auto qos5 = validate_publish("ctl/valve", 5);
  ASSERT_TRUE(qos5);
  EXPECT_EQ(qos5->error_class, ErrorClass::invalid_input);

  auto qos2 = validate_publish("ctl/valve", 2);
  ASSERT_TRUE(qos2);
  EXPECT_EQ(qos2->error_class, ErrorClass::invalid_input);
  EXPECT_NE(qos2->message, qos5->message);

  EXPECT_TRUE(validate_publish("ctl/+", 0));
  EXPECT_FALSE(validate_publish("ctl/valve", 1));
  EXPECT_FALSE(validate_publish("ctl/valve", 0));
}
