#pragma once

#include <string>
#include <vector>

namespace cknlab {

struct Check {
    std::string name;
    bool ok = false;
    std::string detail;
};

// Invariant suite behind `cknlab verify`; quick skips branch continuation.
std::vector<Check> run_invariant_suite(bool quick);

}  // namespace cknlab
