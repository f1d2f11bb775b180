#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace timo::cli {

/// Runs the command-line tool on `args` (args[0] is the program name). Returns the exit
/// code: 0 success, 1 config, 2 I/O, 3 data. Failures print one JSON error object to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace timo::cli
