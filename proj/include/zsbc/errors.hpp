#pragma once

#include <stdexcept>
#include <string>

namespace zsbc {

// Thrown when an input volume has nothing to correct (e.g. constant intensity).
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on NaN/Inf in losses or gradients during online optimization.
struct OptimizationDivergedError : std::runtime_error {
    OptimizationDivergedError(const std::string& msg, int step)
        : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step(step) {}
    int step;
};

// File-level failures: missing file, malformed header, unsupported layout.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace zsbc
