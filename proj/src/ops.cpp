#include "zsbc/ops.hpp"

#include <algorithm>
#include <stdexcept>

namespace zsbc {

namespace {

void require_rank4(const Tensor& t, const char* ctx) {
    if (t.rank() != 4) throw std::invalid_argument(std::string(ctx) + ": expected rank-4 tensor");
}

void check_depthwise_args(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_rank4(input, "conv3d_depthwise");
    if (kernels.rank() != 4 || kernels.dim(1) != 3 || kernels.dim(2) != 3 || kernels.dim(3) != 3)
        throw std::invalid_argument("conv3d_depthwise: kernels must be [C,3,3,3]");
    if (kernels.dim(0) != input.dim(0))
        throw std::invalid_argument("conv3d_depthwise: kernel channel count mismatch");
    if (bias.rank() != 1 || bias.dim(0) != input.dim(0))
        throw std::invalid_argument("conv3d_depthwise: bias channel count mismatch");
}

void check_pointwise_args(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_rank4(input, "conv3d_pointwise");
    if (kernels.rank() != 2)
        throw std::invalid_argument("conv3d_pointwise: kernels must be [Cout,Cin]");
    if (kernels.dim(1) != input.dim(0))
        throw std::invalid_argument("conv3d_pointwise: input channel count mismatch");
    if (bias.rank() != 1 || bias.dim(0) != kernels.dim(0))
        throw std::invalid_argument("conv3d_pointwise: bias channel count mismatch");
}

// Corner-aligned sample coordinate for output index i.
inline double resize_coord(int64_t i, int64_t in, int64_t out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
}

struct AxisSample {
    int64_t lo, hi;
    double w_hi;  // weight of the hi neighbor
};

AxisSample axis_sample(int64_t i, int64_t in, int64_t out) {
    double c = resize_coord(i, in, out);
    int64_t lo = static_cast<int64_t>(std::floor(c));
    lo = std::min(lo, in - 1);
    int64_t hi = std::min(lo + 1, in - 1);
    return {lo, hi, c - static_cast<double>(lo)};
}

}  // namespace

Tensor conv3d_depthwise(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    check_depthwise_args(input, kernels, bias);
    const int64_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    Tensor out(input.shape());
    for (int64_t c = 0; c < C; ++c) {
        const real* k = kernels.data() + c * 27;
        const real b = bias[c];
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    double acc = b;
                    for (int64_t kd = 0; kd < 3; ++kd) {
                        const int64_t sd = d + kd - 1;
                        if (sd < 0 || sd >= D) continue;
                        for (int64_t kh = 0; kh < 3; ++kh) {
                            const int64_t sh = h + kh - 1;
                            if (sh < 0 || sh >= H) continue;
                            for (int64_t kw = 0; kw < 3; ++kw) {
                                const int64_t sw = w + kw - 1;
                                if (sw < 0 || sw >= W) continue;
                                acc += k[(kd * 3 + kh) * 3 + kw] * input.at4(c, sd, sh, sw);
                            }
                        }
                    }
                    out.at4(c, d, h, w) = acc;
                }
    }
    return out;
}

void conv3d_depthwise_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                               Tensor& grad_input, Tensor& grad_kernels, Tensor& grad_bias) {
    require_same_shape(input, upstream, "conv3d_depthwise_backward");
    require_same_shape(grad_input, input, "conv3d_depthwise_backward");
    require_same_shape(grad_kernels, kernels, "conv3d_depthwise_backward");
    const int64_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    for (int64_t c = 0; c < C; ++c) {
        const real* k = kernels.data() + c * 27;
        real* gk = grad_kernels.data() + c * 27;
        double gb = 0.0;
        for (int64_t d = 0; d < D; ++d)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const real g = upstream.at4(c, d, h, w);
                    gb += g;
                    for (int64_t kd = 0; kd < 3; ++kd) {
                        const int64_t sd = d + kd - 1;
                        if (sd < 0 || sd >= D) continue;
                        for (int64_t kh = 0; kh < 3; ++kh) {
                            const int64_t sh = h + kh - 1;
                            if (sh < 0 || sh >= H) continue;
                            for (int64_t kw = 0; kw < 3; ++kw) {
                                const int64_t sw = w + kw - 1;
                                if (sw < 0 || sw >= W) continue;
                                const int64_t ki = (kd * 3 + kh) * 3 + kw;
                                gk[ki] += g * input.at4(c, sd, sh, sw);
                                grad_input.at4(c, sd, sh, sw) += g * k[ki];
                            }
                        }
                    }
                }
        grad_bias[c] += gb;
    }
}

Tensor conv3d_pointwise(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    check_pointwise_args(input, kernels, bias);
    const int64_t Ci = input.dim(0), Co = kernels.dim(0);
    const int64_t V = input.dim(1) * input.dim(2) * input.dim(3);
    Tensor out({Co, input.dim(1), input.dim(2), input.dim(3)});
    for (int64_t o = 0; o < Co; ++o) {
        real* dst = out.data() + o * V;
        for (int64_t v = 0; v < V; ++v) dst[v] = bias[o];
        for (int64_t i = 0; i < Ci; ++i) {
            const real kv = kernels[o * Ci + i];
            const real* src = input.data() + i * V;
            for (int64_t v = 0; v < V; ++v) dst[v] += kv * src[v];
        }
    }
    return out;
}

void conv3d_pointwise_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                               Tensor& grad_input, Tensor& grad_kernels, Tensor& grad_bias) {
    const int64_t Ci = input.dim(0), Co = kernels.dim(0);
    const int64_t V = input.dim(1) * input.dim(2) * input.dim(3);
    if (upstream.dim(0) != Co || upstream.size() != Co * V)
        throw std::invalid_argument("conv3d_pointwise_backward: upstream shape mismatch");
    for (int64_t o = 0; o < Co; ++o) {
        const real* g = upstream.data() + o * V;
        double gb = 0.0;
        for (int64_t v = 0; v < V; ++v) gb += g[v];
        grad_bias[o] += gb;
        for (int64_t i = 0; i < Ci; ++i) {
            const real* src = input.data() + i * V;
            real* gi = grad_input.data() + i * V;
            const real kv = kernels[o * Ci + i];
            double gk = 0.0;
            for (int64_t v = 0; v < V; ++v) {
                gk += g[v] * src[v];
                gi[v] += g[v] * kv;
            }
            grad_kernels[o * Ci + i] += gk;
        }
    }
}

Tensor trilinear_resize(const Tensor& input, int64_t td, int64_t th, int64_t tw) {
    require_rank4(input, "trilinear_resize");
    if (td < 1 || th < 1 || tw < 1)
        throw std::invalid_argument("trilinear_resize: target extents must be >= 1");
    const int64_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    Tensor out({C, td, th, tw});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < td; ++d) {
            const AxisSample ad = axis_sample(d, D, td);
            for (int64_t h = 0; h < th; ++h) {
                const AxisSample ah = axis_sample(h, H, th);
                for (int64_t w = 0; w < tw; ++w) {
                    const AxisSample aw = axis_sample(w, W, tw);
                    double acc = 0.0;
                    for (int dz = 0; dz < 2; ++dz) {
                        const double wd = dz ? ad.w_hi : 1.0 - ad.w_hi;
                        if (wd == 0.0) continue;
                        const int64_t sd = dz ? ad.hi : ad.lo;
                        for (int dy = 0; dy < 2; ++dy) {
                            const double wh = dy ? ah.w_hi : 1.0 - ah.w_hi;
                            if (wh == 0.0) continue;
                            const int64_t sh = dy ? ah.hi : ah.lo;
                            for (int dx = 0; dx < 2; ++dx) {
                                const double ww = dx ? aw.w_hi : 1.0 - aw.w_hi;
                                if (ww == 0.0) continue;
                                const int64_t sw = dx ? aw.hi : aw.lo;
                                acc += wd * wh * ww * input.at4(c, sd, sh, sw);
                            }
                        }
                    }
                    out.at4(c, d, h, w) = acc;
                }
            }
        }
    return out;
}

Tensor trilinear_resize_backward(const Tensor& upstream, const std::vector<int64_t>& src_shape) {
    require_rank4(upstream, "trilinear_resize_backward");
    if (src_shape.size() != 4 || src_shape[0] != upstream.dim(0))
        throw std::invalid_argument("trilinear_resize_backward: bad source shape");
    const int64_t C = src_shape[0], D = src_shape[1], H = src_shape[2], W = src_shape[3];
    const int64_t td = upstream.dim(1), th = upstream.dim(2), tw = upstream.dim(3);
    Tensor grad(src_shape, 0.0);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t d = 0; d < td; ++d) {
            const AxisSample ad = axis_sample(d, D, td);
            for (int64_t h = 0; h < th; ++h) {
                const AxisSample ah = axis_sample(h, H, th);
                for (int64_t w = 0; w < tw; ++w) {
                    const AxisSample aw = axis_sample(w, W, tw);
                    const real g = upstream.at4(c, d, h, w);
                    for (int dz = 0; dz < 2; ++dz) {
                        const double wd = dz ? ad.w_hi : 1.0 - ad.w_hi;
                        if (wd == 0.0) continue;
                        const int64_t sd = dz ? ad.hi : ad.lo;
                        for (int dy = 0; dy < 2; ++dy) {
                            const double wh = dy ? ah.w_hi : 1.0 - ah.w_hi;
                            if (wh == 0.0) continue;
                            const int64_t sh = dy ? ah.hi : ah.lo;
                            for (int dx = 0; dx < 2; ++dx) {
                                const double ww = dx ? aw.w_hi : 1.0 - aw.w_hi;
                                if (ww == 0.0) continue;
                                const int64_t sw = dx ? aw.hi : aw.lo;
                                grad.at4(c, sd, sh, sw) += wd * wh * ww * g;
                            }
                        }
                    }
                }
            }
        }
    return grad;
}

Tensor avg_pool3d(const Tensor& input, int64_t region) {
    require_rank4(input, "avg_pool3d");
    if (region < 1) throw std::invalid_argument("avg_pool3d: region must be >= 1");
    const int64_t C = input.dim(0), D = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t pd = (D + region - 1) / region;
    const int64_t ph = (H + region - 1) / region;
    const int64_t pw = (W + region - 1) / region;
    Tensor out({C, pd, ph, pw});
    for (int64_t c = 0; c < C; ++c)
        for (int64_t bd = 0; bd < pd; ++bd)
            for (int64_t bh = 0; bh < ph; ++bh)
                for (int64_t bw = 0; bw < pw; ++bw) {
                    const int64_t d1 = std::min(D, (bd + 1) * region);
                    const int64_t h1 = std::min(H, (bh + 1) * region);
                    const int64_t w1 = std::min(W, (bw + 1) * region);
                    double acc = 0.0;
                    int64_t n = 0;
                    for (int64_t d = bd * region; d < d1; ++d)
                        for (int64_t h = bh * region; h < h1; ++h)
                            for (int64_t w = bw * region; w < w1; ++w, ++n)
                                acc += input.at4(c, d, h, w);
                    out.at4(c, bd, bh, bw) = acc / static_cast<double>(n);
                }
    return out;
}

Tensor avg_pool3d_backward(const Tensor& upstream, const std::vector<int64_t>& src_shape, int64_t region) {
    if (src_shape.size() != 4) throw std::invalid_argument("avg_pool3d_backward: bad source shape");
    const int64_t C = src_shape[0], D = src_shape[1], H = src_shape[2], W = src_shape[3];
    Tensor grad(src_shape, 0.0);
    const int64_t pd = upstream.dim(1), ph = upstream.dim(2), pw = upstream.dim(3);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t bd = 0; bd < pd; ++bd)
            for (int64_t bh = 0; bh < ph; ++bh)
                for (int64_t bw = 0; bw < pw; ++bw) {
                    const int64_t d1 = std::min(D, (bd + 1) * region);
                    const int64_t h1 = std::min(H, (bh + 1) * region);
                    const int64_t w1 = std::min(W, (bw + 1) * region);
                    const int64_t n = (d1 - bd * region) * (h1 - bh * region) * (w1 - bw * region);
                    const real g = upstream.at4(c, bd, bh, bw) / static_cast<double>(n);
                    for (int64_t d = bd * region; d < d1; ++d)
                        for (int64_t h = bh * region; h < h1; ++h)
                            for (int64_t w = bw * region; w < w1; ++w)
                                grad.at4(c, d, h, w) += g;
                }
    return grad;
}

}  // namespace zsbc
