#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pfguard {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // scenario or verification failure
inline constexpr int kExitUsage = 2;    // bad flags, unreadable or malformed input

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pfguard
