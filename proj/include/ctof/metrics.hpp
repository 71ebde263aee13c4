#pragma once

#include <utility>
#include <vector>

#include "ctof/loss.hpp"
#include "ctof/mask.hpp"
#include "ctof/recon.hpp"
#include "ctof/refiner.hpp"
#include "ctof/scene.hpp"
#include "ctof/tof_model.hpp"

namespace ctof {

struct MetricsReport {
    double rmse = 0;      // mm
    double mae = 0;       // mm
    double thresh3 = 0;   // percent of pixels off by > 3 mm
    double thresh15 = 0;  // percent of pixels off by > 15 mm
    double fp_ratio = 0;  // in-band point count over the open-aperture count
    double chamfer = 0;   // projected units
    double throughput = 0;
    bool fp_valid = false;  // fp protocol needs a two-plane scene
};

std::pair<double, double> rmse_mae(const Tensor& pred, const Tensor& gt);
std::pair<double, double> rmse_mae_region(const Tensor& pred, const Tensor& gt,
                                          const Tensor& region);
// percentage of pixels with |pred - gt| > x_mm
double thresh_metric(const Tensor& pred, const Tensor& gt, double x_mm);

// points strictly inside (z_fg + eps, z_bg - eps), in depth-map units
long fp_band_count(const PointCloud& cloud, double z_fg, double z_bg, double eps_mm);
double fp_ratio(const PointCloud& cloud, double z_fg, double z_bg, double eps_mm,
                double reference_count);

// 1 where every ground-truth depth within `margin_px` (Chebyshev) matches the
// center pixel: the noise-measurement region away from depth edges
Tensor flat_region_mask(const Tensor& gt, int margin_px);
// 1.4826 * median absolute deviation of (pred - gt) over the region
double robust_flat_sigma(const Tensor& pred, const Tensor& gt, const Tensor& region);

struct EvalContext {
    ToFConfig tof;
    NoiseConfig noise;
    LossConfig loss;
    std::uint64_t seed = 1;
    int crop_side = 64;
    int fp_margin_px = 6;
};

struct SceneEvalResult {
    MetricsReport report;
    Tensor depth_raw;    // straight four-bucket reconstruction
    Tensor depth_final;  // refined when a refiner is given
    double fp_count = 0;
    double fp_reference = 0;
    double fp_epsilon = 0;
    double flat_mae = 0;  // MAE restricted to the flat region
};

// simulate -> reconstruct -> (refine) -> metrics, deterministic per
// (ctx.seed, scene_stream). The fp ratio uses the Fig.-8-style two-plane
// protocol: this configuration's in-band count over the all-ones-mask count,
// each band trimmed by 3 sigma of that configuration's own flat-plane noise.
SceneEvalResult evaluate_mask_on_scene(const MaskPatch& mask, const RefinerWeights* refiner,
                                       const LightField& scene, const EvalContext& ctx,
                                       std::uint64_t scene_stream);

struct SuiteEval {
    std::vector<MetricsReport> per_scene;
    MetricsReport aggregate;
};
SuiteEval evaluate_mask(const MaskPatch& mask, const RefinerWeights* refiner,
                        const std::vector<LightField>& scenes, const EvalContext& ctx);

}  // namespace ctof
