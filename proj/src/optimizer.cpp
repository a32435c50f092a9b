#include "zsbc/optimizer.hpp"

#include <cmath>
#include <vector>

#include "zsbc/errors.hpp"
#include "zsbc/ops.hpp"

namespace zsbc {

AdamState AdamState::for_params(const NetworkParams& params) {
    AdamState s;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state,
               real lr, real weight_decay, bool decoupled) {
    std::vector<Tensor*> p, m, v;
    std::vector<const Tensor*> g;
    params.for_each_tensor([&p](Tensor& t) { p.push_back(&t); });
    const NetworkParams& cg = grads;
    cg.for_each_tensor([&g](const Tensor& t) { g.push_back(&t); });
    state.m.for_each_tensor([&m](Tensor& t) { m.push_back(&t); });
    state.v.for_each_tensor([&v](Tensor& t) { v.push_back(&t); });

    for (const Tensor* gt : g)
        if (!gt->all_finite())
            throw OptimizationDivergedError("adam_step: non-finite gradient", state.step);

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step);

    for (size_t t = 0; t < p.size(); ++t) {
        Tensor& pt = *p[t];
        const Tensor& gt = *g[t];
        Tensor& mt = *m[t];
        Tensor& vt = *v[t];
        for (int64_t i = 0; i < pt.size(); ++i) {
            double grad = gt[i];
            if (!decoupled) grad += weight_decay * pt[i];
            mt[i] = state.beta1 * mt[i] + (1.0 - state.beta1) * grad;
            vt[i] = state.beta2 * vt[i] + (1.0 - state.beta2) * grad * grad;
            const double m_hat = mt[i] / bc1;
            const double v_hat = vt[i] / bc2;
            pt[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
            if (decoupled) pt[i] -= lr * weight_decay * pt[i];
        }
    }
}

std::vector<LossBreakdown> optimize(NetworkParams& params, const VolumeContext& ctx,
                                    const CorrectionConfig& cfg, const LossWeights& weights) {
    const int64_t D = ctx.y_full.dim(1), H = ctx.y_full.dim(2), W = ctx.y_full.dim(3);
    AdamState state = AdamState::for_params(params);
    std::vector<LossBreakdown> trace;
    trace.reserve(static_cast<size_t>(cfg.opt_steps));

    for (int step = 0; step < cfg.opt_steps; ++step) {
        ForwardCache cache;
        const ParametricMaps maps = forward(params, ctx.y_small, &cache);

        const Tensor alpha_full = trilinear_resize(maps.alpha, D, H, W);
        const Tensor bias_full = trilinear_resize(maps.bias, D, H, W);

        std::vector<Tensor> hc_states;
        const Tensor hc_out = hc_iterate(ctx.y_full, alpha_full, cfg.hc_iterations, &hc_states);

        const LossBreakdown lb = total_loss(ctx.y_full, hc_out, alpha_full, bias_full, weights);
        if (!std::isfinite(lb.total))
            throw OptimizationDivergedError("optimize: non-finite loss", step);
        trace.push_back(lb);

        Tensor grad_hc, grad_alpha_full, grad_bias_full;
        total_loss_backward(ctx.y_full, hc_out, alpha_full, bias_full, weights,
                            grad_hc, grad_alpha_full, grad_bias_full);
        hc_iterate_backward(hc_states, alpha_full, grad_hc, grad_alpha_full);

        const Tensor grad_alpha_small = trilinear_resize_backward(grad_alpha_full, maps.alpha.shape());
        const Tensor grad_bias_small = trilinear_resize_backward(grad_bias_full, maps.bias.shape());

        NetworkParams grads = params.zeros_like();
        backward(params, cache, grad_alpha_small, grad_bias_small, grads);

        adam_step(params, grads, state, cfg.learning_rate, cfg.weight_decay,
                  cfg.decoupled_weight_decay);
    }
    return trace;
}

}  // namespace zsbc
