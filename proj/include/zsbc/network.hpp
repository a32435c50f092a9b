#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "zsbc/tensor.hpp"

namespace zsbc {

// One depthwise-separable convolution block: depthwise 3x3x3 over Cin
// channels, then pointwise Cin -> Cout, then ReLU.
struct DscBlockParams {
    Tensor dw_kernels;  // [Cin,3,3,3]
    Tensor dw_bias;     // [Cin]
    Tensor pw_kernels;  // [Cout,Cin]
    Tensor pw_bias;     // [Cout]
};

// Fixed 7-block encoder with U-shaped skip concatenations and a two-channel
// pointwise head. Block inputs:
//   b1: x(1)   b2: o1   b3: o2   b4: o3
//   b5: concat(o3,o4)   b6: concat(o2,o5)   b7: concat(o1,o6)
// Head: pointwise on o7; channel 0 -> Tanh -> alpha, channel 1 -> Sigmoid -> bias map.
struct NetworkParams {
    std::vector<DscBlockParams> blocks;
    Tensor head_kernels;  // [2,C]
    Tensor head_bias;     // [2]
    int channels = 8;

    int64_t param_count() const;

    // Visits every trainable tensor in a fixed, documented order:
    // per block (dw_kernels, dw_bias, pw_kernels, pw_bias), then head kernels, head bias.
    void for_each_tensor(const std::function<void(Tensor&)>& fn);
    void for_each_tensor(const std::function<void(const Tensor&)>& fn) const;

    // Zero-valued mirror of this parameter set, for gradient accumulation.
    NetworkParams zeros_like() const;
};

struct ParametricMaps {
    Tensor alpha;  // [1,D,H,W], values in (-1,1)
    Tensor bias;   // [1,D,H,W], values in (0,1)
    enum class Resolution { Downsampled, Full } resolution = Resolution::Downsampled;
};

// Intermediates retained by forward() so backward() can run without re-computation.
struct ForwardCache {
    Tensor input;                    // [1,d,h,w]
    std::vector<Tensor> block_in;    // input of each block (after concat)
    std::vector<Tensor> block_dw;    // depthwise output
    std::vector<Tensor> block_pre;   // pointwise output, pre-ReLU
    std::vector<Tensor> block_out;   // post-ReLU
    Tensor head_pre;                 // [2,d,h,w]
    Tensor alpha, bias_map;          // activated heads
};

// Hidden weights ~ N(0, 0.02), head weights and all biases zero so the first
// forward pass yields alpha == 0 and bias == 0.5 (identity start).
NetworkParams init_params(uint64_t seed, int channels = 8, int num_blocks = 7);

ParametricMaps forward(const NetworkParams& params, const Tensor& x, ForwardCache* cache = nullptr);

// Accumulates dL/dtheta into `grads` given gradients w.r.t. the activated maps.
void backward(const NetworkParams& params, const ForwardCache& cache,
              const Tensor& grad_alpha, const Tensor& grad_bias_map, NetworkParams& grads);

// Flat little-endian float32 dump in for_each_tensor order, for debugging.
void dump_params(const NetworkParams& params, const std::string& path);

}  // namespace zsbc
