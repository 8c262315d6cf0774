#pragma once

#include <cstdio>
#include <string>

namespace ditscale {

// Round-trip representation of a double (17 significant digits).
inline std::string format_real(double value)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

} // namespace ditscale
