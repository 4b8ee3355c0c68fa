#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace adpsgd::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Closed-form-vs-numeric, Monte-Carlo and equivalence checks backing the
// `verify` command. All tolerances are fixed here.
std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace adpsgd::verify
