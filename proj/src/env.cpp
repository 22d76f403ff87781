#include "otmcp/env.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

namespace otmcp::env {

std::optional<std::string> get(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

std::string get_or(const char* name, std::string_view fallback) {
  auto v = get(name);
  return v && !v->empty() ? *v : std::string(fallback);
}

bool flag(const char* name, bool fallback) {
  auto v = get(name);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  return fallback;
}

double number(const char* name, double fallback) {
  auto v = get(name);
  if (!v || v->empty()) return fallback;
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0') return fallback;
  return d;
}

}  // namespace otmcp::env
