#pragma once

// Reference implementations used only by tests. Each one is written from the
// textbook definition and shares no code with the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace oracle {

// MBAP + PDU assembled field by field.
inline std::vector<std::uint8_t> mbap_read(std::uint16_t txn, std::uint8_t unit, std::uint8_t fc,
                                           std::uint16_t addr, std::uint16_t qty) {
  return {static_cast<std::uint8_t>(txn >> 8), static_cast<std::uint8_t>(txn), 0, 0, 0, 6, unit, fc,
          static_cast<std::uint8_t>(addr >> 8), static_cast<std::uint8_t>(addr),
          static_cast<std::uint8_t>(qty >> 8), static_cast<std::uint8_t>(qty)};
}

// Bit-by-bit mask write.
inline std::uint16_t mask_write(std::uint16_t cur, std::uint16_t and_mask, std::uint16_t or_mask) {
  std::uint16_t out = 0;
  for (int b = 0; b < 16; ++b) {
    const bool c = (cur >> b) & 1, a = (and_mask >> b) & 1, o = (or_mask >> b) & 1;
    const bool r = a ? c : o;
    out = static_cast<std::uint16_t>(out | (r << b));
  }
  return out;
}

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  return u;
}

// MQTT topic filter matching by recursive descent over levels.
inline std::vector<std::string> levels(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == '/') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool topic_match_rec(const std::vector<std::string>& f, std::size_t i, const std::vector<std::string>& t,
                            std::size_t j) {
  if (i == f.size()) return j == t.size();
  if (f[i] == "#") return true;
  if (j == t.size()) return false;
  if (f[i] != "+" && f[i] != t[j]) return false;
  return topic_match_rec(f, i + 1, t, j + 1);
}

inline bool topic_match(const std::string& filter, const std::string& topic) {
  const auto t = levels(topic);
  if (!topic.empty() && topic[0] == '$') {
    const auto f = levels(filter);
    if (f[0] == "+" || f[0] == "#") return false;
  }
  return topic_match_rec(levels(filter), 0, t, 0);
}

// Student t quantile by bisection on a Simpson-integrated CDF.
inline double t_pdf(double x, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  return c * std::pow(1 + x * x / df, -(df + 1) / 2);
}

inline double t_cdf(double x, double df) {
  const int n = 20000;
  const double h = x / n;
  double s = t_pdf(0, df) + t_pdf(x, df);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * t_pdf(i * h, df);
  return 0.5 + s * h / 3;
}

inline double t_quantile_975(double df) {
  double lo = 0, hi = 20;
  for (int i = 0; i < 80; ++i) {
    const double mid = (lo + hi) / 2;
    (t_cdf(mid, df) < 0.975 ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

// Base-128 little-endian groups, continuation bit on all but the last; the
// group count is computed up front rather than by the encoder's loop.
inline std::vector<std::uint8_t> leb128(std::uint64_t v) {
  int groups = 1;
  for (auto x = v >> 7; x != 0; x >>= 7) ++groups;
  std::vector<std::uint8_t> out;
  for (int g = 0; g < groups; ++g) {
    const auto low = static_cast<std::uint8_t>((v >> (7 * g)) & 0x7F);
    out.push_back(static_cast<std::uint8_t>(low | (g + 1 < groups ? 0x80 : 0x00)));
  }
  return out;
}

inline std::vector<std::uint8_t> le_bytes(std::uint64_t bits, int n) {
  std::vector<std::uint8_t> out;
  for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(bits / (1ull << (8 * i)) % 256));
  return out;
}

struct Stats {
  double mean, std, lo, hi, median, p95;
};

inline Stats stats(std::vector<double> x) {
  const double n = static_cast<double>(x.size());
  double sum = 0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double ss = 0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  std::sort(x.begin(), x.end());
  const double median = x[(x.size() - 1) / 2];
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  const double p95 = x[std::max<std::size_t>(rank, 1) - 1];
  const double half = x.size() > 1 ? t_quantile_975(n - 1) * sd / std::sqrt(n) : 0.0;
  return {mean, sd, mean - half, mean + half, median, p95};
}

}  // namespace oracle
