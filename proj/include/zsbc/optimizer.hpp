#pragma once

#include <vector>

#include "zsbc/correction.hpp"
#include "zsbc/losses.hpp"
#include "zsbc/network.hpp"
#include "zsbc/tensor.hpp"

namespace zsbc {

// Classical Adam with bias correction. Weight decay is folded into the
// gradient (g += wd * p) unless the decoupled variant is selected.
struct AdamState {
    int step = 0;
    NetworkParams m;  // first moments, shaped like the params
    NetworkParams v;  // second moments
    real beta1 = 0.9;
    real beta2 = 0.999;
    real eps = 1e-8;

    static AdamState for_params(const NetworkParams& params);
};

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               real lr, real weight_decay, bool decoupled = false);

// Normalized observation at both resolutions.
struct VolumeContext {
    Tensor y_full;   // [1,D,H,W]
    Tensor y_small;  // [1,d,h,w]
};

// The per-volume online loop: forward, upsample maps, homogeneity-correct,
// loss, handwritten backward, Adam. Returns one LossBreakdown per step.
std::vector<LossBreakdown> optimize(NetworkParams& params, const VolumeContext& ctx,
                                    const CorrectionConfig& cfg, const LossWeights& weights);

}  // namespace zsbc
