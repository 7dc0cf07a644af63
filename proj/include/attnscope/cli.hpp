#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace attnscope::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;  // validation failure, corrupt dump
inline constexpr int kExitUsage = 2;   // bad flags, unreadable or missing files

/// Runs the attnscope command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Asks a running `serve` subcommand to shut down.
void stop_serving();

}  // namespace attnscope::cli
