#pragma once

#include <string>
#include <vector>

namespace fire::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kSolverError = 3;

/// Entry point of the `fire` executable. args[0] is the program name.
int run(const std::vector<std::string>& args);

}  // namespace fire::cli
