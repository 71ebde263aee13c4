#include "ctof/tof_model.hpp"

#include <cmath>
#include <stdexcept>

namespace ctof {

void ToFConfig::validate() const {
    if (mod_freq_hz <= 0) throw std::invalid_argument("ToFConfig: mod_freq_hz must be positive");
    if (gain <= 0 || integration_ms <= 0)
        throw std::invalid_argument("ToFConfig: gain and integration time must be positive");
    if (light_speed_mm_ms <= 0) throw std::invalid_argument("ToFConfig: bad light speed");
}

void NoiseConfig::validate() const {
    if (a > b) throw std::invalid_argument("NoiseConfig: requires a <= b");
    if (sigma < 0) throw std::invalid_argument("NoiseConfig: sigma must be non-negative");
}

Tensor phase_from_depth(const Tensor& depth_mm, const ToFConfig& cfg) {
    cfg.validate();
    double lambda = cfg.unambiguous_range_mm();
    double k = cfg.phase_per_mm();
    std::int64_t wrapped = 0;
    for (float d : depth_mm.data)
        if (!(d > 0.0f) || d >= lambda) ++wrapped;
    if (wrapped > 0)
        throw std::invalid_argument("phase_from_depth: " + std::to_string(wrapped) +
                                    " depth value(s) outside (0, " + std::to_string(lambda) + " mm)");
    Tensor phi(depth_mm.dims);
    for (std::size_t i = 0; i < depth_mm.data.size(); ++i)
        phi.data[i] = static_cast<float>(k * static_cast<double>(depth_mm.data[i]));
    return phi;
}

Tensor per_view_correlations(const LightField& lf, const ToFConfig& cfg) {
    cfg.validate();
    int U = lf.views_u, V = lf.views_v;
    int H = lf.amplitude.dims[2], W = lf.amplitude.dims[3];
    double lambda = cfg.unambiguous_range_mm();
    double k = cfg.phase_per_mm();
    double scale = cfg.gain * cfg.integration_ms / M_PI;

    Tensor out({4, U, V, H, W});
    for (int u = 0; u < U; ++u)
        for (int v = 0; v < V; ++v)
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    double d = lf.view_depth(u, v, r, c);
                    if (!(d > 0.0) || d >= lambda)
                        throw std::invalid_argument("per_view_correlations: view depth outside (0, lambda)");
                    double phi = k * d;
                    double amp = lf.amplitude(u, v, r, c);
                    for (int p = 0; p < 4; ++p) {
                        double val = amp * (0.5 + std::cos(phi + kPsiOffsets[p])) * scale;
                        out.data[(((static_cast<std::size_t>(p) * U + u) * V + v) * H + r) * W + c] =
                            static_cast<float>(val);
                    }
                }
    return out;
}

Tensor full_aperture(int U, int V) { return Tensor::full({U, V}, 1.0f); }

ViewCorrelations correlation_stack(const LightField& lf, const MicrolensMask& mask,
                                   const Tensor& aperture, const ToFConfig& cfg) {
    int U = lf.views_u, V = lf.views_v;
    int H = lf.amplitude.dims[2], W = lf.amplitude.dims[3];
    if (mask.patch.views_u != U || mask.patch.views_v != V || mask.height != H || mask.width != W)
        throw std::invalid_argument("correlation_stack: mask extents do not match light field");
    if (aperture.ndim() != 2 || aperture.dims[0] != U || aperture.dims[1] != V)
        throw std::invalid_argument("correlation_stack: aperture must be [U,V]");

    ViewCorrelations vc;
    vc.per_view = per_view_correlations(lf, cfg);
    vc.averaged.images = Tensor({4, H, W});

    double inv_views = 1.0 / (static_cast<double>(U) * V);
    for (int p = 0; p < 4; ++p)
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                double acc = 0;  // fixed (u,v) order keeps accumulation deterministic
                for (int u = 0; u < U; ++u)
                    for (int v = 0; v < V; ++v) {
                        double m = mask.at(u, v, r, c);
                        double a = aperture(u, v);
                        if (a == 0.0 || m == 0.0) continue;
                        std::size_t idx =
                            (((static_cast<std::size_t>(p) * U + u) * V + v) * H + r) * W + c;
                        acc += m * a * static_cast<double>(vc.per_view.data[idx]);
                    }
                vc.averaged.images(p, r, c) = static_cast<float>(acc * inv_views);
            }
    return vc;
}

CorrelationStack add_noise(const CorrelationStack& stack, const NoiseConfig& ncfg, RngState& rng) {
    ncfg.validate();
    int H = stack.images.dims[1], W = stack.images.dims[2];
    CorrelationStack out;
    out.images = stack.images;
    for (int p = 0; p < 4; ++p) {
        double s = rng_uniform(rng, ncfg.a, ncfg.b);
        Tensor g = rng_gaussian(rng, {H, W}, ncfg.mu, ncfg.sigma);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c)
                out.images(p, r, c) =
                    static_cast<float>(static_cast<double>(out.images(p, r, c)) + s * g(r, c));
    }
    return out;
}

double mix_phase_oracle(double amp_bg, double phi_bg, double amp_fg, double phi_fg) {
    if (amp_bg < 0 || amp_fg < 0) throw std::invalid_argument("mix_phase_oracle: negative amplitude");
    if (amp_bg + amp_fg <= 0) throw std::invalid_argument("mix_phase_oracle: both amplitudes zero");
    double y = amp_bg * std::sin(phi_bg) + amp_fg * std::sin(phi_fg);
    double x = amp_bg * std::cos(phi_bg) + amp_fg * std::cos(phi_fg);
    double phi = std::atan2(y, x);
    if (phi < 0) phi += 2.0 * M_PI;
    return phi;
}

ResidualPath residual_path_delta(double aperture_u_mm, double sensor_x_mm, const LensGeometry& geom,
                                 const ToFConfig& cfg) {
    cfg.validate();
    if (geom.focal_mm <= 0 || geom.radius_mm <= 0 || geom.depth_mm <= 0)
        throw std::invalid_argument("residual_path_delta: geometry must be positive");
    if (std::abs(aperture_u_mm) > geom.radius_mm)
        throw std::invalid_argument("residual_path_delta: |u| exceeds lens radius");

    auto path = [&](double u) {
        double lens = std::sqrt((geom.radius_mm - u) * (geom.radius_mm - u) +
                                geom.focal_mm * geom.focal_mm);
        double lateral = sensor_x_mm * geom.depth_mm / geom.focal_mm + u;
        double scene = std::sqrt(geom.depth_mm * geom.depth_mm + lateral * lateral);
        return lens + scene;
    };

    ResidualPath rp;
    rp.delta_mm = path(aperture_u_mm) - path(0.0);
    rp.phase_err_rad = 2.0 * M_PI * cfg.omega_per_ms() * rp.delta_mm / cfg.light_speed_mm_ms;
    rp.depth_bias_mm = rp.phase_err_rad * cfg.light_speed_mm_ms / (4.0 * M_PI * cfg.omega_per_ms());
    return rp;
}

}  // namespace ctof
