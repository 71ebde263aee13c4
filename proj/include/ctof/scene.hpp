#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctof/rng.hpp"
#include "ctof/tensor.hpp"

namespace ctof {

// Ordered front-to-back depth layers; the backmost layer is fully opaque.
struct SceneLayer {
    double depth_mm = 0;
    Tensor albedo;   // [H, W] in [0,1]
    Tensor opacity;  // [H, W] binary
};

struct LayeredScene {
    int height = 0;
    int width = 0;
    std::vector<SceneLayer> layers;  // strictly increasing depth
};

// Discretized light field: per-sub-aperture-view amplitude plus the depth of
// the nearest opaque surface along each warped ray. Axis order [U, V, H, W].
struct LightField {
    Tensor amplitude;
    Tensor view_depth;
    int views_u = 0;  // odd, so a central view exists
    int views_v = 0;
    double baseline_px_mm = 0;  // disparity = u * B * (1/z - 1/z_focus) pixels
    double focus_depth_mm = 0;
};

using SceneParams = std::map<std::string, double>;

// flat | edge | bars | staircase | disk. Depth params in mm; textures are
// constants or band-limited noise controlled by `texture` (0 = constant).
LayeredScene preset_scene(const std::string& name, const SceneParams& params, RngState& rng);

LightField render_lightfield(const LayeredScene& scene, int U, int V, double baseline_px_mm,
                             double focus_depth_mm);

// Ground-truth depth map: the central view's per-ray depth.
Tensor central_depth(const LightField& lf);

// Baseline giving `target_px` of disparity at the nearest scene depth when
// focused at `focus_mm`.
double baseline_for_max_disparity(double nearest_mm, double focus_mm, int views_u,
                                  double target_px);

void lightfield_save(const LightField& lf, const std::string& stem);
LightField lightfield_load(const std::string& stem);

}  // namespace ctof
