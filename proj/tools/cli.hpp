#pragma once

#include <string>
#include <vector>

namespace cvxsim::cli {

/// Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numerical
/// failure (non-convergence or too many failed replications).
enum ExitCode { kOk = 0, kUsage = 1, kBadInput = 2, kNumerical = 3 };

/// Runs the command-line tool on the given arguments (argv[0] is the program
/// name). Returns the process exit code.
int run_cli(const std::vector<std::string>& args);

int run_cli(int argc, char** argv);

}  // namespace cvxsim::cli
