#include "ctof/mask.hpp"

#include <cmath>
#include <stdexcept>

namespace ctof {

Tensor MicrolensMask::materialize() const {
    Tensor out({patch.views_u, patch.views_v, height, width});
    for (int u = 0; u < patch.views_u; ++u)
        for (int v = 0; v < patch.views_v; ++v)
            for (int r = 0; r < height; ++r)
                for (int c = 0; c < width; ++c) out(u, v, r, c) = at(u, v, r, c);
    return out;
}

MaskInitSpec parse_mask_pattern(const std::string& text) {
    MaskInitSpec spec;
    std::string name = text;
    std::string arg;
    auto colon = text.find(':');
    if (colon != std::string::npos) {
        name = text.substr(0, colon);
        arg = text.substr(colon + 1);
    }
    if (name == "ones") {
        spec.pattern = MaskPattern::ones;
    } else if (name == "circle") {
        spec.pattern = MaskPattern::circle;
        spec.params["diameter"] = arg.empty() ? 5.0 : std::stod(arg);
    } else if (name == "bernoulli") {
        spec.pattern = MaskPattern::bernoulli;
        spec.params["p"] = arg.empty() ? 0.5 : std::stod(arg);
    } else if (name == "gaussian") {
        spec.pattern = MaskPattern::gaussian;
        spec.params["sigma"] = arg.empty() ? 0.25 : std::stod(arg);
    } else if (name == "barcode") {
        spec.pattern = MaskPattern::barcode;
        spec.params["stripe"] = arg.empty() ? 2.0 : std::stod(arg);
    } else {
        throw std::invalid_argument("unknown mask pattern '" + text + "'");
    }
    return spec;
}

MaskPatch init_mask(const MaskInitSpec& spec, int U, int V, int P, RngState& rng) {
    if (U <= 0 || V <= 0 || P <= 0) throw std::invalid_argument("init_mask: bad extents");
    MaskPatch m(U, V, P, 0.0f);

    auto param = [&](const std::string& key, double fallback) {
        auto it = spec.params.find(key);
        return it == spec.params.end() ? fallback : it->second;
    };

    switch (spec.pattern) {
        case MaskPattern::ones:
            for (float& v : m.values.data) v = 1.0f;
            break;

        case MaskPattern::circle: {
            double d = param("diameter", 5.0);
            if (d < 1.0 || d > std::max(U, V))
                throw std::invalid_argument("init_mask: circle diameter out of range");
            // open cells lie within Euclidean radius (d-1)/2 of the grid center;
            // d=1 opens the chief ray only, d=5 on 9x9 opens 13 cells
            double r2 = (d - 1.0) / 2.0 * (d - 1.0) / 2.0;
            int cu = U / 2, cv = V / 2;
            for (int u = 0; u < U; ++u)
                for (int v = 0; v < V; ++v) {
                    double du = u - cu, dv = v - cv;
                    float open = (du * du + dv * dv <= r2 + 1e-9) ? 1.0f : 0.0f;
                    for (int r = 0; r < P; ++r)
                        for (int c = 0; c < P; ++c) m.values(u, v, r, c) = open;
                }
            break;
        }

        case MaskPattern::bernoulli: {
            double p = param("p", 0.5);
            if (p < 0.0 || p > 1.0) throw std::invalid_argument("init_mask: bernoulli p outside [0,1]");
            for (float& v : m.values.data) v = rng.next_unit() < p ? 1.0f : 0.0f;
            break;
        }

        case MaskPattern::gaussian: {
            double s = param("sigma", 0.25);
            if (s < 0.0) throw std::invalid_argument("init_mask: gaussian sigma negative");
            for (float& v : m.values.data) {
                double x = rng_gaussian_scalar(rng, 0.5, s);
                v = static_cast<float>(std::min(1.0, std::max(0.0, x)));
            }
            break;
        }

        case MaskPattern::barcode: {
            double stripe = param("stripe", 2.0);
            if (stripe < 1.0) throw std::invalid_argument("init_mask: barcode stripe width < 1");
            double cu = (U - 1) / 2.0, cv = (V - 1) / 2.0;
            for (int r = 0; r < P; ++r)
                for (int c = 0; c < P; ++c) {
                    double theta = rng.next_unit() * M_PI;
                    double phase = rng.next_unit() * 2.0 * stripe;
                    double ct = std::cos(theta), st = std::sin(theta);
                    for (int u = 0; u < U; ++u)
                        for (int v = 0; v < V; ++v) {
                            double proj = (u - cu) * ct + (v - cv) * st + phase;
                            long band = static_cast<long>(std::floor(proj / stripe));
                            m.values(u, v, r, c) = (band % 2 == 0) ? 1.0f : 0.0f;
                        }
                }
            break;
        }
    }
    return m;
}

MicrolensMask tile_mask(const MaskPatch& patch, int H, int W, int crop_side, int offset_row,
                        int offset_col) {
    if (crop_side <= 0 || crop_side > patch.patch_side)
        throw std::invalid_argument("tile_mask: crop side must be in [1, P]");
    if (H <= 0 || W <= 0) throw std::invalid_argument("tile_mask: bad sensor extents");
    MicrolensMask m;
    m.patch = patch;
    m.height = H;
    m.width = W;
    m.crop_side = crop_side;
    m.offset_row = ((offset_row % crop_side) + crop_side) % crop_side;
    m.offset_col = ((offset_col % crop_side) + crop_side) % crop_side;
    return m;
}

MaskPatch project_box(MaskPatch patch) {
    for (float& v : patch.values.data) v = std::min(1.0f, std::max(0.0f, v));
    return patch;
}

BinarizeResult binarize(const MaskPatch& patch, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("binarize: threshold must lie in (0,1)");
    BinarizeResult res;
    res.patch = patch;
    res.throughput_before = throughput(patch);
    for (float& v : res.patch.values.data) v = v >= threshold ? 1.0f : 0.0f;
    res.throughput_after = throughput(res.patch);
    return res;
}

double throughput(const MaskPatch& patch) {
    double s = 0;
    for (float v : patch.values.data) s += v;
    return s / static_cast<double>(patch.values.data.size());
}

}  // namespace ctof
