#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace elmsim::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one command line (without the program name) and returns the exit
/// code. Everything the command prints goes to `out` / `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace elmsim::cli
