#pragma once

#include <string>
#include <vector>

namespace cknlab {

// Exit codes: 0 ok, 1 usage, 2 admissibility/domain, 3 solver failure, 4 verify violation.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace cknlab
