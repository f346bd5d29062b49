#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lwrn::cli {

// Runs one command line (args excludes the program name). Returns the exit
// code: 0 success, 1 runtime error, 2 usage or parse error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lwrn::cli
