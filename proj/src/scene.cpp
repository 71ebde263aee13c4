#include "ctof/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctof {

namespace {

double param(const SceneParams& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

double require(const SceneParams& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw std::invalid_argument("preset_scene: missing param '" + key + "'");
    return it->second;
}

// Band-limited noise texture: white noise box-blurred twice, rescaled to
// [lo, hi].
Tensor noise_texture(int H, int W, double lo, double hi, RngState& rng) {
    Tensor t({H, W});
    for (float& v : t.data) v = static_cast<float>(rng.next_unit());
    for (int pass = 0; pass < 2; ++pass) {
        Tensor b({H, W});
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                double s = 0;
                int n = 0;
                for (int dr = -2; dr <= 2; ++dr)
                    for (int dc = -2; dc <= 2; ++dc) {
                        int rr = std::clamp(r + dr, 0, H - 1);
                        int cc = std::clamp(c + dc, 0, W - 1);
                        s += t(rr, cc);
                        ++n;
                    }
                b(r, c) = static_cast<float>(s / n);
            }
        t = b;
    }
    float mn = t.data[0], mx = t.data[0];
    for (float v : t.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    float span = mx - mn;
    for (float& v : t.data)
        v = span > 0 ? static_cast<float>(lo + (hi - lo) * (v - mn) / span)
                     : static_cast<float>(0.5 * (lo + hi));
    return t;
}

Tensor albedo_texture(int H, int W, double base, double texture, RngState& rng) {
    if (texture <= 0) return Tensor::full({H, W}, static_cast<float>(base));
    double lo = std::max(0.0, base - texture);
    double hi = std::min(1.0, base + texture);
    return noise_texture(H, W, lo, hi, rng);
}

SceneLayer make_layer(double depth, Tensor albedo, Tensor opacity) {
    SceneLayer l;
    l.depth_mm = depth;
    l.albedo = std::move(albedo);
    l.opacity = std::move(opacity);
    return l;
}

void check_depth_order(const LayeredScene& s) {
    if (s.layers.empty()) throw std::invalid_argument("preset_scene: no layers");
    for (std::size_t i = 1; i < s.layers.size(); ++i)
        if (!(s.layers[i].depth_mm > s.layers[i - 1].depth_mm))
            throw std::invalid_argument("preset_scene: layer depths must increase front-to-back");
    for (const auto& l : s.layers)
        if (l.depth_mm <= 0) throw std::invalid_argument("preset_scene: depth must be positive");
}

}  // namespace

LayeredScene preset_scene(const std::string& name, const SceneParams& params, RngState& rng) {
    int H = static_cast<int>(param(params, "height", param(params, "size", 64)));
    int W = static_cast<int>(param(params, "width", param(params, "size", 64)));
    if (H < 4 || W < 4) throw std::invalid_argument("preset_scene: size too small");
    double tex = param(params, "texture", 0.15);

    LayeredScene s;
    s.height = H;
    s.width = W;

    if (name == "flat") {
        double z = require(params, "depth");
        s.layers.push_back(make_layer(z, albedo_texture(H, W, param(params, "albedo", 0.7), tex, rng),
                                      Tensor::full({H, W}, 1.0f)));
    } else if (name == "edge") {
        double fg = require(params, "fg");
        double bg = require(params, "bg");
        int split = static_cast<int>(param(params, "split", W / 2));
        Tensor op({H, W});
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) op(r, c) = c < split ? 1.0f : 0.0f;
        s.layers.push_back(
            make_layer(fg, albedo_texture(H, W, param(params, "albedo_fg", 0.8), tex, rng), op));
        s.layers.push_back(make_layer(bg, albedo_texture(H, W, param(params, "albedo_bg", 0.6), tex, rng),
                                      Tensor::full({H, W}, 1.0f)));
    } else if (name == "bars") {
        double fg = require(params, "fg");
        double bg = require(params, "bg");
        int period = static_cast<int>(param(params, "period", 16));
        int width = static_cast<int>(param(params, "bar_width", period / 2));
        if (period < 2 || width < 1 || width >= period)
            throw std::invalid_argument("preset_scene: bad bars geometry");
        Tensor op({H, W});
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) op(r, c) = (c % period) < width ? 1.0f : 0.0f;
        s.layers.push_back(
            make_layer(fg, albedo_texture(H, W, param(params, "albedo_fg", 0.8), tex, rng), op));
        s.layers.push_back(make_layer(bg, albedo_texture(H, W, param(params, "albedo_bg", 0.6), tex, rng),
                                      Tensor::full({H, W}, 1.0f)));
    } else if (name == "staircase") {
        int steps = static_cast<int>(param(params, "steps", 4));
        double near = require(params, "near");
        double far = require(params, "far");
        if (steps < 2 || far <= near) throw std::invalid_argument("preset_scene: bad staircase");
        // nested opacities: step k covers columns [0, (k+1)W/steps), so warped
        // views cannot open gaps between steps
        for (int k = 0; k < steps; ++k) {
            double z = near + (far - near) * k / (steps - 1);
            Tensor op({H, W});
            int limit = (k + 1 == steps) ? W : (k + 1) * W / steps;
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) op(r, c) = c < limit ? 1.0f : 0.0f;
            RngState step_rng = rng.split(100 + k);
            s.layers.push_back(make_layer(
                z, albedo_texture(H, W, param(params, "albedo", 0.7), tex, step_rng), op));
        }
    } else if (name == "disk") {
        double fg = require(params, "fg");
        double bg = require(params, "bg");
        double radius = param(params, "radius", std::min(H, W) / 4.0);
        double cr = param(params, "center_row", (H - 1) / 2.0);
        double cc = param(params, "center_col", (W - 1) / 2.0);
        Tensor op({H, W});
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                double dr = r - cr, dc = c - cc;
                op(r, c) = dr * dr + dc * dc <= radius * radius ? 1.0f : 0.0f;
            }
        s.layers.push_back(
            make_layer(fg, albedo_texture(H, W, param(params, "albedo_fg", 0.8), tex, rng), op));
        s.layers.push_back(make_layer(bg, albedo_texture(H, W, param(params, "albedo_bg", 0.6), tex, rng),
                                      Tensor::full({H, W}, 1.0f)));
    } else {
        throw std::invalid_argument("preset_scene: unknown preset '" + name + "'");
    }

    check_depth_order(s);
    return s;
}

namespace {

float sample_bilinear_clamped(const Tensor& img, double r, double c) {
    int H = img.dims[0], W = img.dims[1];
    r = std::clamp(r, 0.0, static_cast<double>(H - 1));
    c = std::clamp(c, 0.0, static_cast<double>(W - 1));
    int r0 = static_cast<int>(std::floor(r));
    int c0 = static_cast<int>(std::floor(c));
    int r1 = std::min(r0 + 1, H - 1);
    int c1 = std::min(c0 + 1, W - 1);
    double fr = r - r0, fc = c - c0;
    double v = (1 - fr) * ((1 - fc) * img(r0, c0) + fc * img(r0, c1)) +
               fr * ((1 - fc) * img(r1, c0) + fc * img(r1, c1));
    return static_cast<float>(v);
}

float sample_nearest_clamped(const Tensor& img, double r, double c) {
    int H = img.dims[0], W = img.dims[1];
    int rn = static_cast<int>(std::lround(std::clamp(r, 0.0, static_cast<double>(H - 1))));
    int cn = static_cast<int>(std::lround(std::clamp(c, 0.0, static_cast<double>(W - 1))));
    return img(rn, cn);
}

}  // namespace

LightField render_lightfield(const LayeredScene& scene, int U, int V, double baseline_px_mm,
                             double focus_depth_mm) {
    if (U % 2 == 0 || V % 2 == 0 || U < 1 || V < 1)
        throw std::invalid_argument("render_lightfield: aperture extents must be odd");
    if (focus_depth_mm <= 0) throw std::invalid_argument("render_lightfield: focus depth must be positive");
    check_depth_order(scene);

    int H = scene.height, W = scene.width;
    LightField lf;
    lf.views_u = U;
    lf.views_v = V;
    lf.baseline_px_mm = baseline_px_mm;
    lf.focus_depth_mm = focus_depth_mm;
    lf.amplitude = Tensor({U, V, H, W});
    lf.view_depth = Tensor({U, V, H, W});

    int half_u = (U - 1) / 2, half_v = (V - 1) / 2;
    double inv_focus = 1.0 / focus_depth_mm;

    for (int ui = 0; ui < U; ++ui) {
        for (int vi = 0; vi < V; ++vi) {
            int u = ui - half_u;
            int v = vi - half_v;
            for (int r = 0; r < H; ++r) {
                for (int c = 0; c < W; ++c) {
                    // front-to-back: first warped-opaque layer wins the ray
                    for (const SceneLayer& layer : scene.layers) {
                        double q = 1.0 / layer.depth_mm - inv_focus;
                        double sc = u * baseline_px_mm * q;  // column shift, +u moves near content +x
                        double sr = v * baseline_px_mm * q;
                        double src_r = r - sr;
                        double src_c = c - sc;
                        if (sample_nearest_clamped(layer.opacity, src_r, src_c) >= 0.5f) {
                            lf.amplitude(ui, vi, r, c) = sample_bilinear_clamped(layer.albedo, src_r, src_c);
                            lf.view_depth(ui, vi, r, c) = static_cast<float>(layer.depth_mm);
                            break;
                        }
                    }
                }
            }
        }
    }
    return lf;
}

Tensor central_depth(const LightField& lf) {
    int H = lf.view_depth.dims[2], W = lf.view_depth.dims[3];
    int cu = (lf.views_u - 1) / 2, cv = (lf.views_v - 1) / 2;
    Tensor d({H, W});
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) d(r, c) = lf.view_depth(cu, cv, r, c);
    return d;
}

double baseline_for_max_disparity(double nearest_mm, double focus_mm, int views_u,
                                  double target_px) {
    double umax = (views_u - 1) / 2.0;
    double q = std::abs(1.0 / nearest_mm - 1.0 / focus_mm);
    if (umax <= 0 || q <= 0) return 0.0;
    return target_px / (umax * q);
}

void lightfield_save(const LightField& lf, const std::string& stem) {
    tns_write(lf.amplitude, stem + ".amp.tns");
    tns_write(lf.view_depth, stem + ".dep.tns");
    std::ofstream meta(stem + ".meta", std::ios::trunc);
    if (!meta) throw std::runtime_error("lightfield_save: cannot open " + stem + ".meta");
    meta << "U=" << lf.views_u << "\n"
         << "V=" << lf.views_v << "\n"
         << "baseline=" << lf.baseline_px_mm << "\n"
         << "focus_depth_mm=" << lf.focus_depth_mm << "\n";
}

LightField lightfield_load(const std::string& stem) {
    LightField lf;
    lf.amplitude = tns_read(stem + ".amp.tns");
    lf.view_depth = tns_read(stem + ".dep.tns");
    if (lf.amplitude.ndim() != 4 || !lf.amplitude.same_shape(lf.view_depth))
        throw std::runtime_error("lightfield_load: amp/dep shape mismatch for " + stem);

    std::ifstream meta(stem + ".meta");
    if (!meta) throw std::runtime_error("lightfield_load: missing meta sidecar for " + stem);
    std::string line;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        double value = std::stod(line.substr(eq + 1));
        if (key == "U") lf.views_u = static_cast<int>(value);
        else if (key == "V") lf.views_v = static_cast<int>(value);
        else if (key == "baseline") lf.baseline_px_mm = value;
        else if (key == "focus_depth_mm") lf.focus_depth_mm = value;
    }
    if (lf.views_u != lf.amplitude.dims[0] || lf.views_v != lf.amplitude.dims[1])
        throw std::runtime_error("lightfield_load: meta/tensor view count mismatch for " + stem);
    return lf;
}

}  // namespace ctof
