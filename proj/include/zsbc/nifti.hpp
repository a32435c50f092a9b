#pragma once

#include <map>
#include <optional>
#include <string>

#include "zsbc/volume.hpp"

namespace zsbc {

// NIfTI-1 only, .nii or .nii.gz by extension. The voxel grid is used as
// stored; no reorientation. scl_slope/scl_inter are applied on read and
// written back as 1/0.
Volume read_volume(const std::string& path);

// Writes float32 data with the volume's spacing and affine carried bit-exact
// in pixdim and the sform rows.
void write_volume(const Volume& volume, const std::string& path);

// Integer-valued volume interpreted as tissue labels. Labels must appear in
// label_spec; when a reference volume is given the shapes must match.
LabelMask read_mask(const std::string& path, const std::map<int, std::string>& label_spec,
                    const Volume* reference = nullptr);

void write_mask(const LabelMask& mask, const Volume& geometry_from, const std::string& path);

}  // namespace zsbc
