#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cspez::cli {

enum ExitCode : int {
    kOk = 0,
    kIoError = 1,
    kConfigError = 2,
    kNumericalFailure = 3,
    kInfeasible = 4,
};

/// Runs one command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cspez::cli
