#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cord::cli {

// Runs one subcommand. Exit codes: 0 success, 1 usage or configuration
// error, 2 numeric failure (NaN abort), 3 I/O failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace cord::cli
