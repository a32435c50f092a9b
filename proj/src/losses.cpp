#include "zsbc/losses.hpp"

#include <array>
#include <stdexcept>
#include <vector>

#include "zsbc/ops.hpp"

namespace zsbc {

namespace {

inline real sign0(real x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_map(const Tensor& t, const char* ctx) {
    if (t.rank() != 4) throw std::invalid_argument(std::string(ctx) + ": expected [C,D,H,W] tensor");
}

const std::vector<std::array<int, 3>>& neighbor_offsets(Neighborhood nb) {
    static const std::vector<std::array<int, 3>> face = {
        {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    static const auto build = [](int max_norm) {
        std::vector<std::array<int, 3>> v;
        for (int d = -1; d <= 1; ++d)
            for (int h = -1; h <= 1; ++h)
                for (int w = -1; w <= 1; ++w) {
                    const int n = std::abs(d) + std::abs(h) + std::abs(w);
                    if (n >= 1 && n <= max_norm) v.push_back({d, h, w});
                }
        return v;
    };
    static const std::vector<std::array<int, 3>> edge = build(2);
    static const std::vector<std::array<int, 3>> corner = build(3);
    switch (nb) {
        case Neighborhood::Face6: return face;
        case Neighborhood::Edge18: return edge;
        case Neighborhood::Corner26: return corner;
    }
    return face;
}

}  // namespace

real smoothness_loss(const Tensor& map) {
    require_map(map, "smoothness_loss");
    const int64_t C = map.dim(0), D = map.dim(1), H = map.dim(2), W = map.dim(3);
    double acc = 0.0;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const real v = map.at4(c, d, h, w);
                    double s = 0.0;
                    if (d + 1 < D) s += std::abs(map.at4(c, d + 1, h, w) - v);
                    if (h + 1 < H) s += std::abs(map.at4(c, d, h + 1, w) - v);
                    if (w + 1 < W) s += std::abs(map.at4(c, d, h, w + 1) - v);
                    acc += s * s;
                }
    return acc / static_cast<double>(map.size());
}

Tensor smoothness_loss_grad(const Tensor& map) {
    require_map(map, "smoothness_loss_grad");
    const int64_t C = map.dim(0), D = map.dim(1), H = map.dim(2), W = map.dim(3);
    Tensor grad(map.shape(), 0.0);
    const double norm = 2.0 / static_cast<double>(map.size());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const real v = map.at4(c, d, h, w);
                    double s = 0.0;
                    real dd = 0.0, dh = 0.0, dw = 0.0;
                    if (d + 1 < D) { dd = map.at4(c, d + 1, h, w) - v; s += std::abs(dd); }
                    if (h + 1 < H) { dh = map.at4(c, d, h + 1, w) - v; s += std::abs(dh); }
                    if (w + 1 < W) { dw = map.at4(c, d, h, w + 1) - v; s += std::abs(dw); }
                    if (s == 0.0) continue;
                    const double f = norm * s;
                    if (d + 1 < D) {
                        grad.at4(c, d + 1, h, w) += f * sign0(dd);
                        grad.at4(c, d, h, w) -= f * sign0(dd);
                    }
                    if (h + 1 < H) {
                        grad.at4(c, d, h + 1, w) += f * sign0(dh);
                        grad.at4(c, d, h, w) -= f * sign0(dh);
                    }
                    if (w + 1 < W) {
                        grad.at4(c, d, h, w + 1) += f * sign0(dw);
                        grad.at4(c, d, h, w) -= f * sign0(dw);
                    }
                }
    return grad;
}

real spatial_consistency_loss(const Tensor& hc, const Tensor& y, int region, Neighborhood nb) {
    require_same_shape(hc, y, "spatial_consistency_loss");
    const Tensor ph = avg_pool3d(hc, region);
    const Tensor py = avg_pool3d(y, region);
    const int64_t C = ph.dim(0), D = ph.dim(1), H = ph.dim(2), W = ph.dim(3);
    const auto& offs = neighbor_offsets(nb);
    double acc = 0.0;
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w)
                    for (const auto& o : offs) {
                        const int64_t nd = d + o[0], nh = h + o[1], nw = w + o[2];
                        if (nd < 0 || nd >= D || nh < 0 || nh >= H || nw < 0 || nw >= W) continue;
                        const double th = std::abs(ph.at4(c, d, h, w) - ph.at4(c, nd, nh, nw));
                        const double ty = std::abs(py.at4(c, d, h, w) - py.at4(c, nd, nh, nw));
                        const double t = th - ty;
                        acc += t * t;
                    }
    return acc / static_cast<double>(ph.size());
}

Tensor spatial_consistency_loss_grad(const Tensor& hc, const Tensor& y, int region, Neighborhood nb) {
    require_same_shape(hc, y, "spatial_consistency_loss_grad");
    const Tensor ph = avg_pool3d(hc, region);
    const Tensor py = avg_pool3d(y, region);
    const int64_t C = ph.dim(0), D = ph.dim(1), H = ph.dim(2), W = ph.dim(3);
    const auto& offs = neighbor_offsets(nb);
    Tensor gp(ph.shape(), 0.0);
    const double norm = 2.0 / static_cast<double>(ph.size());
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w)
                    for (const auto& o : offs) {
                        const int64_t nd = d + o[0], nh = h + o[1], nw = w + o[2];
                        if (nd < 0 || nd >= D || nh < 0 || nh >= H || nw < 0 || nw >= W) continue;
                        const double hd = ph.at4(c, d, h, w) - ph.at4(c, nd, nh, nw);
                        const double yd = py.at4(c, d, h, w) - py.at4(c, nd, nh, nw);
                        const double t = std::abs(hd) - std::abs(yd);
                        const double f = norm * t * sign0(hd);
                        gp.at4(c, d, h, w) += f;
                        gp.at4(c, nd, nh, nw) -= f;
                    }
    return avg_pool3d_backward(gp, hc.shape(), region);
}

real exposure_loss(const Tensor& hc, int region, real E) {
    const Tensor p = avg_pool3d(hc, region);
    double acc = 0.0;
    for (int64_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - E;
        acc += d * d;
    }
    return acc / static_cast<double>(p.size());
}

Tensor exposure_loss_grad(const Tensor& hc, int region, real E) {
    const Tensor p = avg_pool3d(hc, region);
    Tensor gp(p.shape());
    const double norm = 2.0 / static_cast<double>(p.size());
    for (int64_t i = 0; i < p.size(); ++i) gp[i] = norm * (p[i] - E);
    return avg_pool3d_backward(gp, hc.shape(), region);
}

real prior_loss(const Tensor& y, const Tensor& x_hat, const Tensor& b_hat, real w_smo_bias) {
    require_same_shape(y, x_hat, "prior_loss");
    require_same_shape(y, b_hat, "prior_loss");
    return mean_abs_diff(y, mul(x_hat, b_hat)) + w_smo_bias * smoothness_loss(b_hat);
}

LossBreakdown total_loss(const Tensor& y, const Tensor& hc_out, const Tensor& alpha_full,
                         const Tensor& b_hat_full, const LossWeights& weights) {
    require_same_shape(y, hc_out, "total_loss");
    require_same_shape(y, alpha_full, "total_loss");
    require_same_shape(y, b_hat_full, "total_loss");
    LossBreakdown lb;
    lb.smo_alpha = smoothness_loss(alpha_full);
    lb.spa = spatial_consistency_loss(hc_out, y, weights.spa_region, weights.spa_neighborhood);
    lb.exp = exposure_loss(hc_out, weights.exp_region, weights.exposure_target);
    lb.fidelity = mean_abs_diff(y, mul(hc_out, b_hat_full));
    lb.smo_bias = smoothness_loss(b_hat_full);
    lb.total = weights.w_smo_alpha * lb.smo_alpha + weights.w_spa * lb.spa + weights.w_exp * lb.exp +
               weights.w_fidelity * lb.fidelity + weights.w_smo_bias * lb.smo_bias;
    return lb;
}

void total_loss_backward(const Tensor& y, const Tensor& hc_out, const Tensor& alpha_full,
                         const Tensor& b_hat_full, const LossWeights& weights,
                         Tensor& grad_hc, Tensor& grad_alpha, Tensor& grad_b) {
    grad_alpha = scale(smoothness_loss_grad(alpha_full), weights.w_smo_alpha);

    grad_hc = scale(spatial_consistency_loss_grad(hc_out, y, weights.spa_region, weights.spa_neighborhood),
                    weights.w_spa);
    const Tensor ge = exposure_loss_grad(hc_out, weights.exp_region, weights.exposure_target);
    for (int64_t i = 0; i < grad_hc.size(); ++i) grad_hc[i] += weights.w_exp * ge[i];

    // d mean|y - hc*b| : sign of the residual routed to both factors.
    grad_b = scale(smoothness_loss_grad(b_hat_full), weights.w_smo_bias);
    const double norm = weights.w_fidelity / static_cast<double>(y.size());
    for (int64_t i = 0; i < y.size(); ++i) {
        const real s = sign0(y[i] - hc_out[i] * b_hat_full[i]);
        grad_hc[i] -= norm * s * b_hat_full[i];
        grad_b[i] -= norm * s * hc_out[i];
    }
}

}  // namespace zsbc
