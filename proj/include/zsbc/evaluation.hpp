#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zsbc/volume.hpp"

namespace zsbc {

struct TissueEval {
    int label = 0;
    std::string name;
    double cv_original = 0.0;
    double cv_corrected = 0.0;
    std::string error;  // non-empty when CV could not be computed for this tissue
};

struct EvalReport {
    std::vector<TissueEval> tissues;
    std::optional<double> rmse_to_clean;     // simulation only, after masked mean matching
    std::optional<double> bias_correlation;  // Pearson between implicit and true bias
    std::string timestamp;
    std::string config_echo;
};

// Population standard deviation over mean of the masked intensities.
double coefficient_of_variation(const Volume& volume, const LabelMask& mask, int label);

// Per-tissue CV for both images; with a clean reference also RMSE (corrected
// mean-matched to clean inside the foreground) and the correlation between
// the implicit bias original/corrected and the true bias original/clean.
EvalReport evaluate_correction(const Volume& original, const Volume& corrected,
                               const LabelMask& mask, const Volume* clean = nullptr);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace zsbc
