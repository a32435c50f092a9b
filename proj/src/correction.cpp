#include "zsbc/correction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "zsbc/errors.hpp"
#include "zsbc/network.hpp"
#include "zsbc/ops.hpp"
#include "zsbc/optimizer.hpp"

namespace zsbc {

namespace {

// Linear-interpolation percentile on a sorted copy, numpy-style.
real percentile(std::vector<real> sorted, double p) {
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

void check_unit_range(const Tensor& t, const char* what) {
    for (int64_t i = 0; i < t.size(); ++i)
        if (t[i] < 0.0 || t[i] > 1.0)
            throw std::invalid_argument(std::string("hc_step: ") + what + " outside [0,1]");
}

}  // namespace

std::pair<Tensor, NormStats> normalize(const Volume& volume) {
    const Tensor& data = volume.data;
    if (data.size() < 2) throw DegenerateInputError("normalize: volume too small");
    data.require_finite("normalize");

    std::vector<real> sorted(data.buffer());
    std::sort(sorted.begin(), sorted.end());

    NormStats stats;
    stats.low = percentile(sorted, 0.5);
    stats.high = percentile(sorted, 99.5);
    stats.original_dtype = volume.source_dtype;
    if (!(stats.high > stats.low))
        throw DegenerateInputError("normalize: volume has no intensity spread (constant input)");

    const real span = stats.high - stats.low;
    Tensor unit(data.shape());
    for (int64_t i = 0; i < data.size(); ++i) {
        const real v = std::clamp(data[i], stats.low, stats.high);
        unit[i] = (v - stats.low) / span;
    }
    return {std::move(unit), stats};
}

Tensor denormalize(const Tensor& unit, const NormStats& stats) {
    Tensor out(unit.shape());
    const real span = stats.high - stats.low;
    for (int64_t i = 0; i < unit.size(); ++i) out[i] = unit[i] * span + stats.low;
    return out;
}

Tensor hc_step(const Tensor& image, const Tensor& alpha, bool check_range) {
    require_same_shape(image, alpha, "hc_step");
    if (check_range) {
        check_unit_range(image, "image");
        for (int64_t i = 0; i < alpha.size(); ++i)
            if (alpha[i] < -1.0 || alpha[i] > 1.0)
                throw std::invalid_argument("hc_step: alpha outside [-1,1]");
    }
    Tensor out(image.shape());
    for (int64_t i = 0; i < image.size(); ++i) {
        const real v = image[i] + alpha[i] * image[i] * (1.0 - image[i]);
        out[i] = std::clamp(v, 0.0, 1.0);  // guards rounding at the fixed points
    }
    return out;
}

Tensor hc_iterate(const Tensor& image, const Tensor& alpha, int n,
                  std::vector<Tensor>* states, bool check_range) {
    if (n < 1) throw std::invalid_argument("hc_iterate: n must be >= 1");
    Tensor cur = image;
    if (states) {
        states->clear();
        states->push_back(cur);
    }
    for (int k = 0; k < n; ++k) {
        cur = hc_step(cur, alpha, check_range && k == 0);
        if (states) states->push_back(cur);
    }
    return cur;
}

void hc_iterate_backward(const std::vector<Tensor>& states, const Tensor& alpha,
                         const Tensor& grad_out, Tensor& grad_alpha, Tensor* grad_image) {
    if (states.size() < 2) throw std::invalid_argument("hc_iterate_backward: need recorded states");
    require_same_shape(grad_alpha, alpha, "hc_iterate_backward");
    Tensor g = grad_out;
    for (size_t k = states.size() - 1; k >= 1; --k) {
        const Tensor& h = states[k - 1];  // input of step k
        Tensor g_prev(g.shape());
        for (int64_t i = 0; i < g.size(); ++i) {
            grad_alpha[i] += g[i] * h[i] * (1.0 - h[i]);
            g_prev[i] = g[i] * (1.0 + alpha[i] * (1.0 - 2.0 * h[i]));
        }
        g = std::move(g_prev);
    }
    if (grad_image)
        for (int64_t i = 0; i < g.size(); ++i) (*grad_image)[i] += g[i];
}

CorrectionResult correct_volume(const Volume& volume, const CorrectionConfig& cfg,
                                const LossWeights& weights) {
    if (cfg.hc_iterations < 1 || cfg.opt_steps < 1 || cfg.downsample_factor < 1)
        throw std::invalid_argument("correct_volume: invalid configuration");
    const auto t0 = std::chrono::steady_clock::now();

    CorrectionResult result;
    result.config = cfg;
    result.weights = weights;

    auto [unit, stats] = normalize(volume);
    const int64_t D = unit.dim(0), H = unit.dim(1), W = unit.dim(2);
    if (std::min({D, H, W}) < 16)
        result.warnings.push_back("volume has extents below 16 voxels; correction quality may suffer");

    VolumeContext ctx;
    ctx.y_full = unit.reshaped({1, D, H, W});
    const int64_t f = cfg.downsample_factor;
    ctx.y_small = trilinear_resize(ctx.y_full, std::max<int64_t>(1, D / f),
                                   std::max<int64_t>(1, H / f), std::max<int64_t>(1, W / f));

    NetworkParams params = init_params(cfg.seed, cfg.channels);
    result.loss_trace = optimize(params, ctx, cfg, weights);

    ForwardCache cache;
    const ParametricMaps maps = forward(params, ctx.y_small, &cache);
    const Tensor alpha_full = trilinear_resize(maps.alpha, D, H, W);
    const Tensor bias_full = trilinear_resize(maps.bias, D, H, W);
    const Tensor corrected_unit = hc_iterate(ctx.y_full, alpha_full, cfg.hc_iterations);

    result.corrected.data = denormalize(corrected_unit, stats).reshaped({D, H, W});
    result.corrected.spacing = volume.spacing;
    result.corrected.affine = volume.affine;
    result.corrected.source_dtype = volume.source_dtype;

    result.bias.data = bias_full.reshaped({D, H, W});
    result.bias.spacing = volume.spacing;
    result.bias.affine = volume.affine;

    result.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace zsbc
