#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ditscale {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// args excludes the program name. Results go to `out`, diagnostics (JSON on failure) to `err`.
int run_cli(std::vector<std::string> const &args, std::ostream &out, std::ostream &err);

} // namespace ditscale
