#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neuroscan::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

/// Runs one command line (without the program name). JSON results go to `out`,
/// progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neuroscan::cli
