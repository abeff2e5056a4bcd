#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace gpsm {

/// Shortest-round-trip-safe text for a double (17 significant digits);
/// "NA" for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace gpsm
