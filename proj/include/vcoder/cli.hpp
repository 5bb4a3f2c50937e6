#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vcoder::cli {

// Process exit codes.
enum ExitCode : int {
    ok = 0,
    internal_error = 1,
    config_error = 2,
    data_error = 3,
    numeric_error = 4,
};

// Runs one subcommand (train, recover, split-export, loss-profile, disclose,
// linkpred, stats). args[0] is the program name. Failures print a single JSON
// error line to `err` and return the matching exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

} // namespace vcoder::cli
