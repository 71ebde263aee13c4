#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "ctof/recon.hpp"
#include "ctof/scene.hpp"

using namespace ctof;

namespace {

CorrelationStack stack_from_phase(double phi, double amplitude = 1.0, double bias = 0.0) {
    CorrelationStack s;
    s.images = Tensor({4, 1, 1});
    for (int k = 0; k < 4; ++k)
        s.images(k, 0, 0) =
            static_cast<float>(amplitude * (0.5 + std::cos(phi + kPsiOffsets[k])) + bias);
    return s;
}

}  // namespace

TEST_CASE("four-bucket estimator inverts the cosine model") {
    PhaseEstimate pe = phase_estimate(stack_from_phase(M_PI / 3));
    CHECK(pe.phase(0, 0) == doctest::Approx(M_PI / 3).epsilon(1e-6));
    CHECK(pe.valid(0, 0) == 1.0f);

    // phi = 0: zero numerator, positive denominator
    CHECK(phase_estimate(stack_from_phase(0.0)).phase(0, 0) == doctest::Approx(0.0));

    // sweep the full circle
    for (double phi = 0.05; phi < 2.0 * M_PI - 0.05; phi += 0.11) {
        CHECK(phase_estimate(stack_from_phase(phi)).phase(0, 0) ==
              doctest::Approx(phi).epsilon(1e-6));
    }
}

TEST_CASE("estimator cancels bias and amplitude") {
    double phi = 1.234;
    PhaseEstimate base = phase_estimate(stack_from_phase(phi));
    PhaseEstimate biased = phase_estimate(stack_from_phase(phi, 1.0, 17.5));
    CHECK(biased.phase(0, 0) == doctest::Approx(base.phase(0, 0)).epsilon(1e-6));

    PhaseEstimate scaled = phase_estimate(stack_from_phase(phi, 42.0, 0.0));
    CHECK(scaled.phase(0, 0) == doctest::Approx(base.phase(0, 0)).epsilon(1e-6));
}

TEST_CASE("zero-amplitude pixels get phase 0 and a validity flag") {
    CorrelationStack s;
    s.images = Tensor({4, 1, 2}, 3.25f);  // all four buckets equal at both pixels
    s.images(0, 0, 1) = 5.0f;             // second pixel has signal
    s.images(3, 0, 1) = 1.0f;
    PhaseEstimate pe = phase_estimate(s);
    CHECK(pe.phase(0, 0) == 0.0f);
    CHECK(pe.valid(0, 0) == 0.0f);
    CHECK(pe.valid(0, 1) == 1.0f);
}

TEST_CASE("depth_from_phase scales by the half wavelength") {
    ToFConfig cfg;
    cfg.mod_freq_hz = 30.0e6;
    cfg.light_speed_mm_ms = 3.0e8;
    Tensor phi({2}, static_cast<float>(M_PI));
    phi.data[1] = 0.0f;
    Tensor z = depth_from_phase(phi, cfg);
    CHECK(z.data[0] == doctest::Approx(2500.0).epsilon(1e-6));
    CHECK(z.data[1] == 0.0f);
}

TEST_CASE("project_points lays out pixel coordinates") {
    Tensor one({1, 1}, 1234.5f);
    PointCloud pc = project_points(one, 2.0);
    CHECK(pc.points.dims == std::vector<int>{1, 3});
    CHECK(pc.points(0, 0) == 0.0f);
    CHECK(pc.points(0, 1) == 0.0f);
    CHECK(pc.points(0, 2) == doctest::Approx(2469.0));

    Tensor flat({4, 5}, 100.0f);
    PointCloud fc = project_points(flat, 1.0);
    REQUIRE(fc.points.dims[0] == 20);
    for (int i = 0; i < 20; ++i) {
        CHECK(fc.points(i, 0) == static_cast<float>(i % 5));
        CHECK(fc.points(i, 1) == static_cast<float>(i / 5));
        CHECK(fc.points(i, 2) == 100.0f);
    }

    CHECK_THROWS_AS(project_points(flat, 0.0), std::invalid_argument);
}

TEST_CASE("layered ground truth projects to exactly two z values") {
    RngState rng(3);
    LayeredScene s =
        preset_scene("edge", {{"fg", 1000.0}, {"bg", 3000.0}, {"size", 16}, {"texture", 0.0}}, rng);
    LightField lf = render_lightfield(s, 3, 3, 500.0, 3000.0);
    PointCloud pc = project_points(central_depth(lf), 1.0);
    std::set<float> zs;
    for (int i = 0; i < pc.points.dims[0]; ++i) zs.insert(pc.points(i, 2));
    CHECK(zs == std::set<float>{1000.0f, 3000.0f});
}

TEST_CASE("noise-free single-layer pipeline is the identity on depth") {
    ToFConfig cfg;
    RngState rng(6);
    for (double frac : {0.15, 0.5, 0.85}) {
        double depth = cfg.unambiguous_range_mm() * frac;
        LayeredScene s = preset_scene("flat", {{"depth", depth}, {"size", 12}, {"texture", 0.3}}, rng);
        LightField lf = render_lightfield(s, 3, 3, 200.0, depth);
        MaskPatch ones(3, 3, 12, 1.0f);
        ViewCorrelations vc =
            correlation_stack(lf, tile_mask(ones, 12, 12, 12, 0, 0), full_aperture(3, 3), cfg);
        Tensor z = depth_from_phase(phase_estimate(vc.averaged).phase, cfg);
        for (float v : z.data) CHECK(std::abs(v - depth) / depth < 1e-6);
    }
}
