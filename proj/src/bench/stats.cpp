#include "otmcp/bench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace otmcp::bench {

double t_critical_975(std::size_t df) {
  if (df == 0) throw std::invalid_argument("t distribution needs df >= 1");
  return boost::math::quantile(boost::math::students_t(static_cast<double>(df)), 0.975);
}

Stats aggregate(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("cannot aggregate an empty sample");
  std::sort(x.begin(), x.end());
  Stats s;
  s.n = x.size();
  const double n = static_cast<double>(s.n);
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  const double half = s.n > 1 ? t_critical_975(s.n - 1) * s.std / std::sqrt(n) : 0.0;
  s.ci95_lo = s.mean - half;
  s.ci95_hi = s.mean + half;
  s.median = x[(s.n - 1) / 2];
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n - 1e-9));
  s.p95 = x[std::clamp<std::size_t>(rank, 1, s.n) - 1];
  return s;
}

nlohmann::json to_json(const Stats& s) {
  return {{"n", s.n},           {"mean", s.mean},     {"std", s.std}, {"ci95", {s.ci95_lo, s.ci95_hi}},
          {"median", s.median}, {"p95", s.p95}};
}

}  // namespace otmcp::bench
