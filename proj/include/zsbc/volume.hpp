#pragma once

#include <array>
#include <map>
#include <string>

#include "zsbc/tensor.hpp"

namespace zsbc {

using Affine = std::array<std::array<double, 4>, 4>;

inline Affine identity_affine() {
    Affine a{};
    for (int i = 0; i < 4; ++i) a[i][i] = 1.0;
    return a;
}

// A 3D scalar field with scanner geometry metadata.
struct Volume {
    Tensor data;  // [D,H,W]
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm
    Affine affine = identity_affine();             // voxel-to-world
    std::string source_dtype = "float32";
};

// Integer tissue labels aligned with a companion Volume. Label 0 is background.
struct LabelMask {
    Tensor data;  // [D,H,W], small non-negative integers stored as real
    std::map<int, std::string> label_names;
};

}  // namespace zsbc
