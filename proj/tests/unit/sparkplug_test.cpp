#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "otmcp/sparkplug/sparkplug.hpp"

using namespace otmcp;
using namespace otmcp::sparkplug;

TEST(SparkplugTopic, RenderDeviceTopic) {
  EXPECT_EQ(render_topic({"plant-a", MessageType::DDATA, "edge-node-1", "device-1"}),
            "spBv1.0/plant-a/DDATA/edge-node-1/device-1");
  EXPECT_EQ(render_topic({"g", MessageType::NBIRTH, "e", std::nullopt}), "spBv1.0/g/NBIRTH/e");
}

TEST(SparkplugTopic, DevicePresenceMustMatchType) {
  for (const Topic& bad : {Topic{"g", MessageType::NBIRTH, "e", "d"}, Topic{"g", MessageType::DDATA, "e", std::nullopt},
                           Topic{"g/x", MessageType::NDATA, "e", std::nullopt},
                           Topic{"g", MessageType::DCMD, "e", "d+"}, Topic{"", MessageType::NCMD, "e", std::nullopt}}) {
    try {
      render_topic(bad);
      FAIL() << "accepted " << bad.group_id;
    } catch (const Failure& f) {
      EXPECT_EQ(f.error_class(), ErrorClass::invalid_input);
    }
  }
}

TEST(SparkplugTopic, ParseInvertsRender) {
  const MessageType types[] = {MessageType::NBIRTH, MessageType::NDEATH, MessageType::DBIRTH, MessageType::DDEATH,
                               MessageType::NDATA,  MessageType::DDATA,  MessageType::NCMD,   MessageType::DCMD};
  for (auto type : types) {
    Topic t{"grp", type, "edge", std::nullopt};
    if (is_device_message(type)) t.device_id = "dev";
    const auto parsed = parse_topic(render_topic(t));
    ASSERT_TRUE(parsed);
    EXPECT_EQ(*parsed, t);
  }
  EXPECT_FALSE(parse_topic("spBv1.0/g/DDATA/e"));
  EXPECT_FALSE(parse_topic("other/g/NDATA/e"));
}

TEST(SparkplugVarint, ThreeHundred) {
  std::vector<std::uint8_t> out;
  append_varint(out, 300);
  const std::vector<std::uint8_t> expect{0xAC, 0x02};
  EXPECT_EQ(out, expect);
  EXPECT_EQ(oracle::leb128(300), expect);
  std::size_t pos = 0;
  EXPECT_EQ(read_varint(out, pos), 300u);
  EXPECT_EQ(pos, 2u);
}

TEST(SparkplugVarint, AgreesWithOracle) {
  std::mt19937_64 rng(300);
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng() >> (rng() % 64);
    std::vector<std::uint8_t> out;
    append_varint(out, v);
    ASSERT_EQ(out, oracle::leb128(v)) << v;
    std::size_t pos = 0;
    ASSERT_EQ(read_varint(out, pos), v);
  }
}

TEST(SparkplugVarint, MalformedIsProtocolError) {
  const std::vector<std::uint8_t> truncated{0x80, 0x80};
  const std::vector<std::uint8_t> too_long(11, 0xFF);
  for (const auto& bytes : {truncated, too_long}) {
    std::size_t pos = 0;
    try {
      read_varint(bytes, pos);
      FAIL();
    } catch (const Failure& f) {
      EXPECT_EQ(f.error_class(), ErrorClass::protocol_error);
    }
  }
}

TEST(SparkplugPayload, EmptyPayloadIsMinimal) {
  const Payload p{0, {}, 0};
  const auto bytes = encode_payload(p);
  const std::vector<std::uint8_t> expect{0x08, 0x00, 0x18, 0x00};
  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(decode_payload(bytes), p);
  EXPECT_TRUE(encode_payload(Payload{}).empty());
}

TEST(SparkplugPayload, FloatMetricIsLittleEndianFixed32) {
  const Payload p{std::nullopt, {{"temperature", std::nullopt, std::nullopt, MetricValue{25.0f}}}, std::nullopt};
  const auto bytes = encode_payload(p);

  std::vector<std::uint8_t> metric{0x0A, 11};
  for (char c : std::string("temperature")) metric.push_back(static_cast<std::uint8_t>(c));
  metric.push_back(0x20);  // field 4, varint
  metric.push_back(9);     // Float
  metric.push_back((12 << 3) | 5);
  const auto le = oracle::le_bytes(oracle::float_bits(25.0f), 4);
  metric.insert(metric.end(), le.begin(), le.end());
  std::vector<std::uint8_t> expect{0x12, static_cast<std::uint8_t>(metric.size())};
  expect.insert(expect.end(), metric.begin(), metric.end());

  EXPECT_EQ(bytes, expect);
  EXPECT_EQ(le, (std::vector<std::uint8_t>{0x00, 0x00, 0xC8, 0x41}));
  const auto back = decode_payload(bytes);
  ASSERT_EQ(back.metrics.size(), 1u);
  EXPECT_EQ(back.metrics[0].name, "temperature");
  EXPECT_EQ(std::get<float>(back.metrics[0].value), 25.0f);
}

TEST(SparkplugPayload, NegativeInt32UsesTwosComplementWord) {
  const Payload p{std::nullopt, {{"x", std::nullopt, std::nullopt, MetricValue{std::int32_t{-1}}}}, std::nullopt};
  const auto bytes = encode_payload(p);
  const std::vector<std::uint8_t> value_tail{0x50, 0xFF, 0xFF, 0xFF, 0xFF, 0x0F};
  ASSERT_GE(bytes.size(), value_tail.size());
  EXPECT_TRUE(std::equal(value_tail.begin(), value_tail.end(), bytes.end() - value_tail.size()));
  EXPECT_EQ(decode_payload(bytes), p);
}

TEST(SparkplugPayload, UnknownFieldsAreSkipped) {
  auto bytes = encode_payload(Payload{5, {{"m", std::nullopt, std::nullopt, MetricValue{true}}}, 3});
  bytes.push_back((9 << 3) | 2);
  bytes.push_back(2);
  bytes.push_back('h');
  bytes.push_back('i');
  const auto p = decode_payload(bytes);
  EXPECT_EQ(p.seq, 3u);
  EXPECT_EQ(p.timestamp_ms, 5u);
  ASSERT_EQ(p.metrics.size(), 1u);
}

TEST(SparkplugPayload, MalformedInputIsProtocolError) {
  auto bytes = encode_payload(Payload{1, {{"m", std::nullopt, std::nullopt, MetricValue{1.5}}}, 1});
  bytes.resize(bytes.size() - 4);
  try {
    decode_payload(bytes);
    FAIL();
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::protocol_error);
  }
}

namespace {

MetricValue random_value(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 6);
  std::uniform_real_distribution<double> real(-1e6, 1e6);
  switch (kind(rng)) {
    case 0:
      return static_cast<std::int32_t>(rng());
    case 1:
      return static_cast<std::int64_t>(rng());
    case 2:
      return static_cast<std::uint64_t>(rng());
    case 3:
      return static_cast<float>(real(rng));
    case 4:
      return real(rng);
    case 5:
      return (rng() & 1) == 1;
    default:
      return std::string(rng() % 20, static_cast<char>('a' + rng() % 26));
  }
}

}  // namespace

TEST(SparkplugPayload, RandomPayloadsRoundTrip) {
  std::mt19937_64 rng(42);
  std::set<DataType> seen;
  for (int i = 0; i < 1500; ++i) {
    Payload p;
    if (rng() & 1) p.timestamp_ms = rng() >> 20;
    if (rng() & 1) p.seq = rng() % 256;
    for (auto n = rng() % 5; n > 0; --n) {
      Metric m{"metric-" + std::to_string(rng() % 1000), std::nullopt, std::nullopt, random_value(rng)};
      if (rng() & 1) m.alias = rng() % 5000;
      if (rng() & 1) m.timestamp_ms = rng() >> 22;
      seen.insert(m.datatype());
      p.metrics.push_back(std::move(m));
    }
    ASSERT_EQ(decode_payload(encode_payload(p)), p) << "iteration " << i;
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(SparkplugSeq, BirthThenConsecutiveWithWrap) {
  SeqCounter seq;
  EXPECT_EQ(seq.birth(), 0);
  EXPECT_EQ(seq.next(), 1);
  EXPECT_EQ(seq.next(), 2);
  for (int i = 3; i < 255; ++i) seq.next();
  EXPECT_EQ(seq.next(), 255);
  EXPECT_EQ(seq.next(), 0);
  EXPECT_EQ(seq.birth(), 0);
  EXPECT_EQ(seq.next(), 1);
}

TEST(SparkplugJson, ShorthandAndExplicitForms) {
  const auto a = metric_from_json(json{{"name", "temperature"}, {"float", 25.0}});
  EXPECT_EQ(a.datatype(), DataType::Float);
  EXPECT_EQ(std::get<float>(a.value), 25.0f);

  const auto b = metric_from_json(json{{"name", "count"}, {"datatype", "Int64"}, {"value", 7}});
  EXPECT_EQ(std::get<std::int64_t>(b.value), 7);

  const auto c = metric_from_json(json{{"name", "on"}, {"value", true}});
  EXPECT_EQ(c.datatype(), DataType::Boolean);

  const auto d = metric_from_json(json{{"name", "r"}, {"value", 1.25}});
  EXPECT_EQ(d.datatype(), DataType::Double);

  try {
    metric_from_json(json{{"name", "x"}, {"int32", 1e12}});
    FAIL();
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::type_mismatch);
  }
  try {
    metric_from_json(json{{"value", 1}});
    FAIL();
  } catch (const Failure& f) {
    EXPECT_EQ(f.error_class(), ErrorClass::invalid_input);
  }
  const auto j = metric_to_json(a);
  EXPECT_EQ(j["name"], "temperature");
  EXPECT_EQ(j["datatype"], "Float");
}
