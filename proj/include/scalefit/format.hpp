#pragma once

#include <charconv>
#include <string>

namespace scalefit {

// Shortest round-trip decimal form, independent of locale and stream state.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

}  // namespace scalefit
