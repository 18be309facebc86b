#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ia2u::cli {

/// Runs one `ia2u` subcommand. `args` excludes the program name. Progress and
/// results go to `out`, error messages to `err`. Returns the exit code: 0 on
/// success, 1 on a runtime error, the CLI11 code on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ia2u::cli
