#include "ctof/recon.hpp"

#include <cmath>
#include <stdexcept>

namespace ctof {

PhaseEstimate phase_estimate(const CorrelationStack& stack) {
    if (stack.images.ndim() != 3 || stack.images.dims[0] != 4)
        throw std::invalid_argument("phase_estimate: stack must be [4,H,W]");
    int H = stack.images.dims[1], W = stack.images.dims[2];
    PhaseEstimate pe;
    pe.phase = Tensor({H, W});
    pe.valid = Tensor({H, W}, 1.0f);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            // kPsiOffsets order: [0, pi/2, 3pi/2, pi]
            double c0 = stack.images(0, r, c);
            double c90 = stack.images(1, r, c);
            double c270 = stack.images(2, r, c);
            double c180 = stack.images(3, r, c);
            double y = c270 - c90;
            double x = c0 - c180;
            if (y == 0.0 && x == 0.0) {
                pe.phase(r, c) = 0.0f;
                pe.valid(r, c) = 0.0f;
                continue;
            }
            double phi = std::atan2(y, x);
            if (phi < 0) phi += 2.0 * M_PI;
            if (phi >= 2.0 * M_PI) phi = 0.0;
            pe.phase(r, c) = static_cast<float>(phi);
        }
    return pe;
}

Tensor depth_from_phase(const Tensor& phi, const ToFConfig& cfg) {
    cfg.validate();
    double mm_per_rad = cfg.light_speed_mm_ms / (4.0 * M_PI * cfg.omega_per_ms());
    Tensor z(phi.dims);
    for (std::size_t i = 0; i < phi.data.size(); ++i)
        z.data[i] = static_cast<float>(mm_per_rad * static_cast<double>(phi.data[i]));
    return z;
}

PointCloud project_points(const Tensor& depth, double depth_scale) {
    if (depth.ndim() != 2) throw std::invalid_argument("project_points: depth must be [H,W]");
    if (!(depth_scale > 0)) throw std::invalid_argument("project_points: depth scale must be positive");
    int H = depth.dims[0], W = depth.dims[1];
    PointCloud pc;
    pc.depth_scale = depth_scale;
    pc.height = H;
    pc.width = W;
    pc.points = Tensor({H * W, 3});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            int i = r * W + c;
            pc.points(i, 0) = static_cast<float>(c);
            pc.points(i, 1) = static_cast<float>(r);
            pc.points(i, 2) = static_cast<float>(depth_scale * static_cast<double>(depth(r, c)));
        }
    return pc;
}

}  // namespace ctof
