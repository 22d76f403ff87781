#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace otmcp::bench {

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
  double median = 0.0;  // lower middle element for even n
  double p95 = 0.0;     // nearest rank: element ceil(0.95 n)
};

/// Two-sided 95% Student t critical value t(0.975; df). df >= 1.
double t_critical_975(std::size_t df);

/// Throws std::invalid_argument for an empty sample. A single sample has
/// std 0 and a degenerate interval.
Stats aggregate(std::vector<double> samples);

nlohmann::json to_json(const Stats& s);

}  // namespace otmcp::bench
