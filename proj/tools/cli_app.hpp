#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace upn::cli {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 1,
  kNotConverged = 2,
  kValidationFailed = 3,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace upn::cli
