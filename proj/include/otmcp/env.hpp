#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace otmcp::env {

std::optional<std::string> get(const char* name);
std::string get_or(const char* name, std::string_view fallback);

/// "1"/"true"/"yes"/"on" (any case) are true, "0"/"false"/"no"/"off" false;
/// unset or unrecognized text yields `fallback`.
bool flag(const char* name, bool fallback);

/// Parses a real; unset or malformed yields `fallback`.
double number(const char* name, double fallback);

}  // namespace otmcp::env
