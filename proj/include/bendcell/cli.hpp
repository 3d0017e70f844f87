#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bendcell::cli {

// Runs one command (args excludes the program name, natural order).
// Exit codes: 0 success, 1 file IO, 2 validation, 3 internal failure,
// 4 simulation found abnormalities.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bendcell::cli
