#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace zsbc {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckResult {
    std::string op;
    double max_rel_err = 0.0;
    bool pass = false;
};

// Central finite-difference verification (step 1e-3, 64-bit accumulation) of
// every differentiable op plus the end-to-end total loss on an 8^3 volume.
// Relative error uses an absolute floor of 1e-6 near zero. With inject_error
// the analytic gradients are deliberately corrupted (negative control).
std::vector<GradCheckResult> run_gradient_checks(uint64_t seed, int size = 4,
                                                 bool inject_error = false);

bool all_checks_pass(const std::vector<GradCheckResult>& results);

}  // namespace zsbc
