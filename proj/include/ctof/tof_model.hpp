#pragma once

#include <array>
#include <cmath>

#include "ctof/mask.hpp"
#include "ctof/rng.hpp"
#include "ctof/scene.hpp"
#include "ctof/tensor.hpp"

namespace ctof {

// Modulation and sensor constants. Frequencies are Hz; internal math uses
// cycles per millisecond so mm and mm/ms stay consistent.
struct ToFConfig {
    double mod_freq_hz = 30.0e6;
    double amplitude = 1.0;  // illumination waveform amplitude (alpha)
    double bias = 0.5;       // illumination waveform bias (beta)
    double gain = 20.0;
    double integration_ms = 200.0;
    double light_speed_mm_ms = 2.998e8;

    double omega_per_ms() const { return mod_freq_hz * 1e-3; }
    double unambiguous_range_mm() const { return light_speed_mm_ms / (2.0 * omega_per_ms()); }
    // radians of phase per mm of depth
    double phase_per_mm() const { return 4.0 * M_PI * omega_per_ms() / light_speed_mm_ms; }
    void validate() const;
};

struct NoiseConfig {
    double a = 0.75;
    double b = 1.25;
    double mu = 0.0;
    double sigma = 3.0;

    static NoiseConfig off() { return NoiseConfig{1.0, 1.0, 0.0, 0.0}; }
    void validate() const;
};

struct LensGeometry {
    double focal_mm = 8.0;
    double radius_mm = 2.5;
    double depth_mm = 1000.0;
};

// Sampling order of the four reference phase offsets.
inline constexpr std::array<double, 4> kPsiOffsets = {0.0, M_PI / 2.0, 3.0 * M_PI / 2.0, M_PI};

struct CorrelationStack {
    Tensor images;  // [4, H, W], one image per psi offset in kPsiOffsets order
};

// Phi = (4 pi omega / c) * D, in [0, 2pi). Errors if any depth wraps.
Tensor phase_from_depth(const Tensor& depth_mm, const ToFConfig& cfg);

struct ViewCorrelations {
    Tensor per_view;  // [4, U, V, H, W]
    CorrelationStack averaged;
};

// Per-view correlations from the view depths, without mask or aperture:
// C[psi][u][v] = L_u * (0.5 + cos(Phi_u + psi)) * g*T/pi.
Tensor per_view_correlations(const LightField& lf, const ToFConfig& cfg);

// Masked view average: C_psi = (1/(U*V)) sum_u M_u * A(u) * C_{psi,u}.
// All U*V views are counted in the normalizer regardless of mask or aperture.
ViewCorrelations correlation_stack(const LightField& lf, const MicrolensMask& mask,
                                   const Tensor& aperture, const ToFConfig& cfg);

Tensor full_aperture(int U, int V);

// One scalar uniform(a,b) draw and one Gaussian field per psi offset.
CorrelationStack add_noise(const CorrelationStack& stack, const NoiseConfig& ncfg, RngState& rng);

// Phase of a two-source mixture (foreground/background light at one pixel),
// mapped to [0, 2pi).
double mix_phase_oracle(double amp_bg, double phi_bg, double amp_fg, double phi_fg);

struct ResidualPath {
    double delta_mm = 0;
    double phase_err_rad = 0;
    double depth_bias_mm = 0;
};

// Extra path length of the ray through aperture offset u versus the chief
// ray, and the phase/depth error it would induce. Diagnostic only; the
// simulator drops this term.
ResidualPath residual_path_delta(double aperture_u_mm, double sensor_x_mm, const LensGeometry& geom,
                                 const ToFConfig& cfg);

}  // namespace ctof
