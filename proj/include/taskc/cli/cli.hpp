#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace taskc::cli {

enum ExitCode : int { Success = 0, Errors = 1, Usage = 2, RuntimeFailure = 3 };

/// Runs the `taskc` driver. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace taskc::cli
