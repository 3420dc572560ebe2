#pragma once

#include <iosfwd>

namespace stickernet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Entry point of the `stickernet` tool. Subcommands: generate, train,
/// compose, eval. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stickernet::cli
