#pragma once

#include <array>

#include "zsbc/tensor.hpp"

namespace zsbc {

// Spatial kernels: depthwise 3x3x3, stride 1, zero padding 1, so the output
// shape equals the input shape. kernels is [C,3,3,3], bias is [C].
Tensor conv3d_depthwise(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// Accumulates into the grad outputs (callers zero them first or chain additions).
void conv3d_depthwise_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                               Tensor& grad_input, Tensor& grad_kernels, Tensor& grad_bias);

// 1x1x1 cross-channel mix: kernels is [Cout,Cin], bias [Cout].
Tensor conv3d_pointwise(const Tensor& input, const Tensor& kernels, const Tensor& bias);

void conv3d_pointwise_backward(const Tensor& input, const Tensor& kernels, const Tensor& upstream,
                               Tensor& grad_input, Tensor& grad_kernels, Tensor& grad_bias);

// Corner-aligned trilinear resampling of [C,D,H,W] to [C,D',H',W']. With this
// convention constant fields are reproduced exactly for any target shape, and
// linear ramps land exactly on their interpolated values.
Tensor trilinear_resize(const Tensor& input, int64_t td, int64_t th, int64_t tw);

// Adjoint of trilinear_resize: scatters the upstream gradient back to the
// source grid. src_shape is the forward input shape [C,D,H,W].
Tensor trilinear_resize_backward(const Tensor& upstream, const std::vector<int64_t>& src_shape);

// Non-overlapping r^3 block averages; partial edge blocks average only the
// voxels present. Output extents are ceil-divided.
Tensor avg_pool3d(const Tensor& input, int64_t region);

Tensor avg_pool3d_backward(const Tensor& upstream, const std::vector<int64_t>& src_shape, int64_t region);

}  // namespace zsbc
