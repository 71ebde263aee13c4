#pragma once

#include <map>
#include <string>

#include "ctof/rng.hpp"
#include "ctof/tensor.hpp"

namespace ctof {

// Learnable per-pixel sub-aperture transmittance tile. values[u][v][r][c] is
// the transmittance of aperture cell (u,v) at patch pixel (r,c), kept in [0,1].
struct MaskPatch {
    Tensor values;  // [U, V, P, P]
    int views_u = 0;
    int views_v = 0;
    int patch_side = 0;

    MaskPatch() = default;
    MaskPatch(int U, int V, int P, float fill = 1.0f)
        : values({U, V, P, P}, fill), views_u(U), views_v(V), patch_side(P) {}
};

// Logical view of a MaskPatch tiled over an H x W sensor: the centered K x K
// crop of the patch repeats toroidally, phased by (offset_row, offset_col).
struct MicrolensMask {
    MaskPatch patch;
    int height = 0;
    int width = 0;
    int crop_side = 0;
    int offset_row = 0;
    int offset_col = 0;

    float at(int u, int v, int row, int col) const {
        int cr = (patch.patch_side - crop_side) / 2;
        int cc = cr;
        int r = cr + (row + offset_row) % crop_side;
        int c = cc + (col + offset_col) % crop_side;
        return patch.values(u, v, r, c);
    }

    Tensor materialize() const;  // [U, V, H, W]
};

enum class MaskPattern { ones, circle, bernoulli, gaussian, barcode };

struct MaskInitSpec {
    MaskPattern pattern = MaskPattern::ones;
    std::map<std::string, double> params;
};

// "ones" | "circle:5" | "bernoulli:0.5" | "gaussian:0.25" | "barcode:2"
MaskInitSpec parse_mask_pattern(const std::string& text);

MaskPatch init_mask(const MaskInitSpec& spec, int U, int V, int P, RngState& rng);

MicrolensMask tile_mask(const MaskPatch& patch, int H, int W, int crop_side, int offset_row,
                        int offset_col);

MaskPatch project_box(MaskPatch patch);

struct BinarizeResult {
    MaskPatch patch;
    double throughput_before = 0;
    double throughput_after = 0;
};
BinarizeResult binarize(const MaskPatch& patch, double threshold);

double throughput(const MaskPatch& patch);

}  // namespace ctof
