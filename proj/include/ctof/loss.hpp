#pragma once

#include "ctof/recon.hpp"
#include "ctof/tensor.hpp"

namespace ctof {

struct LossConfig {
    double w_smooth = 100.0;   // w_L
    double w_chamfer = 0.08;   // w_C
    double delta = 1.0;
    double depth_scale = 1.0;  // s_z, projected units per mm
    void validate() const;
};

// Elementwise Huber-style map: |d| - delta/2 beyond delta, d^2/(2 delta) inside.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double delta);

enum class ChamferMode { bruteforce, accelerated };

// One-directional mean distance from each recon point to its nearest ground
// truth point. Accelerated mode matches brute force bit-exactly.
double chamfer(const PointCloud& recon, const PointCloud& gt, ChamferMode mode);

// (1/HW) sum_i (w_L * smooth_l1_i + w_C * chamfer_i)
double total_loss(const Tensor& refined, const Tensor& gt, const LossConfig& cfg);

}  // namespace ctof
