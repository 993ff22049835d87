#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace opdist {

// Exit codes: 0 success (possibly with warnings), 1 runtime failure, 2 bad configuration or usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace opdist
