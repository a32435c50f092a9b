#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zsbc/losses.hpp"
#include "zsbc/tensor.hpp"
#include "zsbc/volume.hpp"

namespace zsbc {

// Intensity window used to map the input into [0,1] and back.
struct NormStats {
    real low = 0.0;
    real high = 1.0;
    std::string original_dtype = "float32";
};

struct CorrectionConfig {
    int hc_iterations = 4;
    int opt_steps = 100;
    real learning_rate = 0.005;
    real weight_decay = 1e-4;
    int downsample_factor = 8;
    uint64_t seed = 0;
    int channels = 8;
    bool decoupled_weight_decay = false;
};

struct CorrectionResult {
    Volume corrected;  // X-hat, original intensity scale
    Volume bias;       // upsampled sigmoid-head map, unitless
    std::vector<LossBreakdown> loss_trace;
    double elapsed_seconds = 0.0;
    CorrectionConfig config;
    LossWeights weights;
    std::vector<std::string> warnings;
};

// Clips at the 0.5th/99.5th intensity percentiles and maps [low,high] -> [0,1].
// Throws DegenerateInputError when there is no intensity spread.
std::pair<Tensor, NormStats> normalize(const Volume& volume);

// Inverse affine map only; clipped tails are not restored.
Tensor denormalize(const Tensor& unit, const NormStats& stats);

// One homogeneity-correction update: I + alpha * I * (1 - I), elementwise.
// With check_range, inputs outside [0,1] / [-1,1] raise invalid-argument.
Tensor hc_step(const Tensor& image, const Tensor& alpha, bool check_range = false);

// n applications of hc_step with the same alpha map. When `states` is given it
// receives the n+1 intermediate images HC^0..HC^n for the backward pass.
Tensor hc_iterate(const Tensor& image, const Tensor& alpha, int n,
                  std::vector<Tensor>* states = nullptr, bool check_range = false);

// Vector-Jacobian product through the recurrence. Accumulates into grad_alpha;
// writes the gradient w.r.t. the initial image into grad_image if non-null.
void hc_iterate_backward(const std::vector<Tensor>& states, const Tensor& alpha,
                         const Tensor& grad_out, Tensor& grad_alpha, Tensor* grad_image = nullptr);

// The full zero-shot pipeline: normalize, downsample, optimize the network
// online, apply the learned correction at full resolution, denormalize.
CorrectionResult correct_volume(const Volume& volume, const CorrectionConfig& cfg,
                                const LossWeights& weights = LossWeights{});

}  // namespace zsbc
