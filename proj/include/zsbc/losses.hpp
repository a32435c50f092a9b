#pragma once

#include "zsbc/tensor.hpp"

namespace zsbc {

enum class Neighborhood { Face6, Edge18, Corner26 };

struct LossWeights {
    real w_smo_alpha = 1600.0;
    real w_smo_bias = 1600.0;
    real w_spa = 1.0;
    real w_exp = 1.0;
    real w_fidelity = 1.0;
    real exposure_target = 0.6;  // well-exposedness level E
    int spa_region = 4;
    int exp_region = 8;
    Neighborhood spa_neighborhood = Neighborhood::Face6;
};

// Unweighted component values plus the weighted total for one step.
struct LossBreakdown {
    real smo_alpha = 0.0;
    real spa = 0.0;
    real exp = 0.0;
    real fidelity = 0.0;
    real smo_bias = 0.0;
    real total = 0.0;
};

// (1/N) sum_v (|grad_x| + |grad_y| + |grad_z|)^2 with forward differences;
// the last slice along each axis contributes 0 to that axis.
real smoothness_loss(const Tensor& map);
Tensor smoothness_loss_grad(const Tensor& map);

// Pool both images into region^3 blocks, then penalize changes in pairwise
// block contrast relative to the reference y. Ordered pairs, normalized by
// the block count.
real spatial_consistency_loss(const Tensor& hc, const Tensor& y, int region, Neighborhood nb);
Tensor spatial_consistency_loss_grad(const Tensor& hc, const Tensor& y, int region, Neighborhood nb);

// Mean squared deviation of region^3 block means from the target E.
real exposure_loss(const Tensor& hc, int region, real E);
Tensor exposure_loss_grad(const Tensor& hc, int region, real E);

// mean |y - x_hat * b_hat| + w_smo_bias * smoothness_loss(b_hat)
real prior_loss(const Tensor& y, const Tensor& x_hat, const Tensor& b_hat, real w_smo_bias);

LossBreakdown total_loss(const Tensor& y, const Tensor& hc_out, const Tensor& alpha_full,
                         const Tensor& b_hat_full, const LossWeights& weights);

// Gradients of the weighted total w.r.t. the three optimized maps. Note that
// hc_out itself depends on alpha; that chain is the caller's (hc_iterate
// backward). grad_alpha here covers only the direct smoothness path.
void total_loss_backward(const Tensor& y, const Tensor& hc_out, const Tensor& alpha_full,
                         const Tensor& b_hat_full, const LossWeights& weights,
                         Tensor& grad_hc, Tensor& grad_alpha, Tensor& grad_b);

}  // namespace zsbc
