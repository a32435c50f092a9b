#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "zsbc/volume.hpp"

namespace zsbc {

// Nested-ellipsoid phantom: label t covers the t-th ellipsoid minus the ones
// inside it; the innermost ellipsoid carries the last (brightest) tissue.
struct PhantomSpec {
    std::array<int64_t, 3> shape{64, 64, 64};  // D,H,W; extents >= 16
    std::vector<real> tissue_intensities{0.3, 0.6, 0.9};
    std::vector<double> axis_fractions{0.42, 0.30, 0.17};  // semi-axes per tissue, fraction of extent
    double center_jitter = 0.04;  // fraction of extent
    double axis_jitter = 0.08;    // relative
    uint64_t seed = 0;
};

struct BiasSpec {
    real strength = 0.3;  // field spans [1-s, 1+s] before mean normalization
    int num_bumps = 4;
    double min_width = 0.25;  // Gaussian sigma as fraction of extent
    double max_width = 0.50;
    uint64_t seed = 0;
};

std::pair<Volume, LabelMask> make_phantom(const PhantomSpec& spec);

// Sum of broad Gaussian bumps rescaled to [1-s, 1+s], then divided by its
// mean so the field averages to 1.
Volume make_bias_field(const std::array<int64_t, 3>& shape, const BiasSpec& spec);

// Forward corruption: Y = X * B + Gaussian(0, noise_sigma), seeded.
Volume corrupt(const Volume& clean, const Volume& bias, real noise_sigma, uint64_t seed);

}  // namespace zsbc
