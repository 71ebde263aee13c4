#pragma once

#include "ctof/tensor.hpp"
#include "ctof/tof_model.hpp"

namespace ctof {

struct PhaseEstimate {
    Tensor phase;  // [H, W] radians in [0, 2pi)
    Tensor valid;  // [H, W] 1 where amplitude was non-zero, else 0 (phase forced to 0)
};

// Four-bucket estimator: phi = atan2(C(3pi/2) - C(pi/2), C(0) - C(pi)).
// Exactly inverts the cosine correlation model; constant bias and positive
// scale cancel.
PhaseEstimate phase_estimate(const CorrelationStack& stack);

// z = phi * c / (4 pi omega), wrap count fixed to zero.
Tensor depth_from_phase(const Tensor& phi, const ToFConfig& cfg);

struct PointCloud {
    Tensor points;  // [N, 3] = (x_px, y_px, s_z * depth)
    double depth_scale = 1.0;
    int height = 0;  // source map extents, 0 if not from a map
    int width = 0;
};

// Point i*W+j = (j, i, s_z * depth[i][j]).
PointCloud project_points(const Tensor& depth, double depth_scale);

}  // namespace ctof
