#include "zsbc/network.hpp"

#include <fstream>
#include <random>
#include <stdexcept>

#include "zsbc/errors.hpp"
#include "zsbc/ops.hpp"

namespace zsbc {

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const int64_t V = a.dim(1) * a.dim(2) * a.dim(3);
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.dim(0) * V);
    return out;
}

// Adds the two channel-halves of `g` into ga and gb.
void split_channels_add(const Tensor& g, Tensor& ga, Tensor& gb) {
    const int64_t V = g.dim(1) * g.dim(2) * g.dim(3);
    const int64_t na = ga.dim(0) * V;
    for (int64_t i = 0; i < na; ++i) ga[i] += g[i];
    for (int64_t i = 0; i < gb.dim(0) * V; ++i) gb[i] += g[na + i];
}

Tensor extract_channel(const Tensor& t, int64_t c) {
    const int64_t V = t.dim(1) * t.dim(2) * t.dim(3);
    Tensor out({1, t.dim(1), t.dim(2), t.dim(3)});
    std::copy(t.data() + c * V, t.data() + (c + 1) * V, out.data());
    return out;
}

// Input channel width of each of the 7 blocks for hidden width C.
std::vector<int64_t> block_in_channels(int64_t C) {
    return {1, C, C, C, 2 * C, 2 * C, 2 * C};
}

}  // namespace

int64_t NetworkParams::param_count() const {
    int64_t n = 0;
    for_each_tensor([&n](const Tensor& t) { n += t.size(); });
    return n;
}

void NetworkParams::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    for (auto& b : blocks) {
        fn(b.dw_kernels);
        fn(b.dw_bias);
        fn(b.pw_kernels);
        fn(b.pw_bias);
    }
    fn(head_kernels);
    fn(head_bias);
}

void NetworkParams::for_each_tensor(const std::function<void(const Tensor&)>& fn) const {
    for (const auto& b : blocks) {
        fn(b.dw_kernels);
        fn(b.dw_bias);
        fn(b.pw_kernels);
        fn(b.pw_bias);
    }
    fn(head_kernels);
    fn(head_bias);
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z;
    z.channels = channels;
    for (const auto& b : blocks)
        z.blocks.push_back({Tensor(b.dw_kernels.shape()), Tensor(b.dw_bias.shape()),
                            Tensor(b.pw_kernels.shape()), Tensor(b.pw_bias.shape())});
    z.head_kernels = Tensor(head_kernels.shape());
    z.head_bias = Tensor(head_bias.shape());
    return z;
}

NetworkParams init_params(uint64_t seed, int channels, int num_blocks) {
    if (num_blocks != 7)
        throw std::invalid_argument("init_params: the skip topology is defined for exactly 7 blocks");
    if (channels < 1) throw std::invalid_argument("init_params: channels must be >= 1");

    std::mt19937_64 rng(seed);
    std::normal_distribution<real> gauss(0.0, 0.02);

    NetworkParams p;
    p.channels = channels;
    const auto cin = block_in_channels(channels);
    for (int b = 0; b < num_blocks; ++b) {
        DscBlockParams blk;
        blk.dw_kernels = Tensor({cin[b], 3, 3, 3});
        for (int64_t i = 0; i < blk.dw_kernels.size(); ++i) blk.dw_kernels[i] = gauss(rng);
        blk.dw_bias = Tensor({cin[b]});
        blk.pw_kernels = Tensor({channels, cin[b]});
        for (int64_t i = 0; i < blk.pw_kernels.size(); ++i) blk.pw_kernels[i] = gauss(rng);
        blk.pw_bias = Tensor({channels});
        p.blocks.push_back(std::move(blk));
    }
    // Zero head: first forward pass is alpha == 0, bias map == 0.5.
    p.head_kernels = Tensor({2, channels});
    p.head_bias = Tensor({2});
    return p;
}

ParametricMaps forward(const NetworkParams& params, const Tensor& x, ForwardCache* cache) {
    if (x.rank() != 4 || x.dim(0) != 1)
        throw std::invalid_argument("network forward: input must be [1,d,h,w]");
    x.require_finite("network forward");
    if (params.blocks.size() != 7) throw std::invalid_argument("network forward: expected 7 blocks");

    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c.input = x;
    c.block_in.assign(7, Tensor());
    c.block_dw.assign(7, Tensor());
    c.block_pre.assign(7, Tensor());
    c.block_out.assign(7, Tensor());

    auto run_block = [&](int b, Tensor in) {
        const auto& blk = params.blocks[static_cast<size_t>(b)];
        c.block_in[static_cast<size_t>(b)] = std::move(in);
        c.block_dw[static_cast<size_t>(b)] =
            conv3d_depthwise(c.block_in[static_cast<size_t>(b)], blk.dw_kernels, blk.dw_bias);
        c.block_pre[static_cast<size_t>(b)] =
            conv3d_pointwise(c.block_dw[static_cast<size_t>(b)], blk.pw_kernels, blk.pw_bias);
        c.block_out[static_cast<size_t>(b)] = relu_map(c.block_pre[static_cast<size_t>(b)]);
    };

    run_block(0, x);
    run_block(1, c.block_out[0]);
    run_block(2, c.block_out[1]);
    run_block(3, c.block_out[2]);
    run_block(4, concat_channels(c.block_out[2], c.block_out[3]));
    run_block(5, concat_channels(c.block_out[1], c.block_out[4]));
    run_block(6, concat_channels(c.block_out[0], c.block_out[5]));

    c.head_pre = conv3d_pointwise(c.block_out[6], params.head_kernels, params.head_bias);
    c.alpha = tanh_map(extract_channel(c.head_pre, 0));
    c.bias_map = sigmoid_map(extract_channel(c.head_pre, 1));

    ParametricMaps maps;
    maps.alpha = c.alpha;
    maps.bias = c.bias_map;
    maps.resolution = ParametricMaps::Resolution::Downsampled;
    return maps;
}

void backward(const NetworkParams& params, const ForwardCache& cache,
              const Tensor& grad_alpha, const Tensor& grad_bias_map, NetworkParams& grads) {
    require_same_shape(grad_alpha, cache.alpha, "network backward");
    require_same_shape(grad_bias_map, cache.bias_map, "network backward");

    // Activation backward, packed into the 2-channel head gradient.
    const Tensor ga_pre = tanh_backward(cache.alpha, grad_alpha);
    const Tensor gb_pre = sigmoid_backward(cache.bias_map, grad_bias_map);
    Tensor grad_head_pre(cache.head_pre.shape());
    const int64_t V = cache.head_pre.dim(1) * cache.head_pre.dim(2) * cache.head_pre.dim(3);
    std::copy(ga_pre.data(), ga_pre.data() + V, grad_head_pre.data());
    std::copy(gb_pre.data(), gb_pre.data() + V, grad_head_pre.data() + V);

    std::vector<Tensor> grad_out(7);
    for (int b = 0; b < 7; ++b) grad_out[static_cast<size_t>(b)] = Tensor(cache.block_out[static_cast<size_t>(b)].shape());

    conv3d_pointwise_backward(cache.block_out[6], params.head_kernels, grad_head_pre,
                              grad_out[6], grads.head_kernels, grads.head_bias);

    for (int b = 6; b >= 0; --b) {
        const auto& blk = params.blocks[static_cast<size_t>(b)];
        auto& gblk = grads.blocks[static_cast<size_t>(b)];
        const Tensor g_pre = relu_backward(cache.block_pre[static_cast<size_t>(b)], grad_out[static_cast<size_t>(b)]);
        Tensor g_dw(cache.block_dw[static_cast<size_t>(b)].shape());
        conv3d_pointwise_backward(cache.block_dw[static_cast<size_t>(b)], blk.pw_kernels, g_pre,
                                  g_dw, gblk.pw_kernels, gblk.pw_bias);
        Tensor g_in(cache.block_in[static_cast<size_t>(b)].shape());
        conv3d_depthwise_backward(cache.block_in[static_cast<size_t>(b)], blk.dw_kernels, g_dw,
                                  g_in, gblk.dw_kernels, gblk.dw_bias);
        switch (b) {
            case 6: split_channels_add(g_in, grad_out[0], grad_out[5]); break;
            case 5: split_channels_add(g_in, grad_out[1], grad_out[4]); break;
            case 4: split_channels_add(g_in, grad_out[2], grad_out[3]); break;
            case 3: for (int64_t i = 0; i < g_in.size(); ++i) grad_out[2][i] += g_in[i]; break;
            case 2: for (int64_t i = 0; i < g_in.size(); ++i) grad_out[1][i] += g_in[i]; break;
            case 1: for (int64_t i = 0; i < g_in.size(); ++i) grad_out[0][i] += g_in[i]; break;
            case 0: break;  // gradient w.r.t. the image input is not needed
        }
    }
}

void dump_params(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("dump_params: cannot open " + path);
    params.for_each_tensor([&out](const Tensor& t) {
        for (int64_t i = 0; i < t.size(); ++i) {
            const float v = static_cast<float>(t[i]);
            out.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    });
    if (!out) throw IoError("dump_params: write failed for " + path);
}

}  // namespace zsbc
