#pragma once

#include "geocond/raster.hpp"

namespace geocond {

struct NormalValidationReport {
    std::int64_t unit_norm_violations = 0;  // valid pixels with | ||n|| - 1 | > 1e-5
    std::int64_t invalid_pixels = 0;        // exact (0,0,0)
    std::int64_t total_pixels = 0;
};

constexpr const char* kNormalConvention = "toward_camera_neg_z";

/// Camera-space normals from metric depth: back-project
/// p(u,v) = depth * ((u-cx)/fx, (v-cy)/fy, 1), cross the central-difference
/// tangents dp/du x dp/dv (one-sided at borders), normalize, and orient
/// toward the camera. Pixels whose stencil touches invalid depth come out
/// as (0,0,0).
NormalFrame normals_from_depth(const DepthFrame& depth, const Pinhole& intr, const Mask& mask);

NormalValidationReport validate_normals(const NormalFrame& frame);

}  // namespace geocond
