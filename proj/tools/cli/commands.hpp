#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cale::cli {

// Runs one CLI invocation; args excludes the program name. Returns the exit
// code: 0 success, 1 runtime error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cale::cli
