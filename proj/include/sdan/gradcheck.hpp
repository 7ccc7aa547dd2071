#pragma once

#include <string>
#include <vector>

#include "sdan/common.hpp"

namespace sdan {

struct GradcheckOptions {
    bool f64 = false;
    std::string op_filter;  // empty = every op
    int trials = 100;
    int max_entries = 64;  // finite-difference probes per tensor per trial
    std::uint64_t seed = 2026;
    bool inject_fault = false;  // negative-control fixture: corrupts the
                                // deformable conv weight gradient
};

struct GradcheckResult {
    std::string op;
    double max_rel_err = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Central-difference checks for every differentiable operator and the full
// model loss. The full-model case always runs in 64-bit arithmetic; see
// README. Throws ConfigError for an unknown op filter.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opts);

}  // namespace sdan
