#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cdi::cli {

/// Exit codes: 0 ran (pass/fail lives in the payload), 2 usage or invalid model, 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs one command. `args` excludes the program name. Payloads go to `out` unless
/// --out is given, in which case the file and its run manifest are written instead.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cdi::cli
