#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "spectralflow/errors.hpp"

namespace spectralflow::detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view token, const std::string& context) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(context + ": bad number '" + std::string(token) + "'");
  }
  return v;
}

inline long long parse_int(std::string_view token, const std::string& context) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ConfigError(context + ": bad integer '" + std::string(token) + "'");
  }
  return v;
}

}  // namespace spectralflow::detail
