#pragma once

#include <cstdio>
#include <string>

namespace raypath {

// Shortest round-trip-exact decimal form of a double.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace raypath
