#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sace {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,
    exit_data = 3,
    exit_numerical = 4,
};

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, messages to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "start:stop:step" or a comma-separated list. Throws UsageError on a
/// malformed grid or a value outside [0, 1].
std::vector<double> parse_rho_grid(const std::string& text);

}  // namespace sace
