#pragma once

#include <string>
#include <vector>

namespace greenflow::cli {

enum ExitCode : int { Ok = 0, Usage = 1, Numerical = 2 };

/// Runs one subcommand. argv[0] is the program name.
int run(const std::vector<std::string>& argv);

}  // namespace greenflow::cli
