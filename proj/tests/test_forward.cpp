#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "ctof/recon.hpp"
#include "ctof/scene.hpp"
#include "ctof/tof_model.hpp"

using namespace ctof;

namespace {

LightField flat_field(double depth, double albedo, int size, int views) {
    LayeredScene s;
    s.height = size;
    s.width = size;
    SceneLayer l;
    l.depth_mm = depth;
    l.albedo = Tensor::full({size, size}, static_cast<float>(albedo));
    l.opacity = Tensor::full({size, size}, 1.0f);
    s.layers.push_back(l);
    return render_lightfield(s, views, views, 100.0, depth);
}

MaskPatch uniform_mask(int U, int V, int P, float v) { return MaskPatch(U, V, P, v); }

}  // namespace

TEST_CASE("phase_from_depth matches the wavelength relation") {
    ToFConfig cfg;
    cfg.mod_freq_hz = 30.0e6;

    SUBCASE("half the unambiguous range maps to pi") {
        Tensor d({2, 2}, static_cast<float>(cfg.unambiguous_range_mm() / 2.0));
        Tensor phi = phase_from_depth(d, cfg);
        for (float v : phi.data) CHECK(v == doctest::Approx(M_PI).epsilon(1e-6));
    }
    SUBCASE("2500 mm is exactly pi for a 5 m range") {
        ToFConfig round = cfg;
        round.light_speed_mm_ms = 3.0e8;  // classroom constant: lambda exactly 5 m
        CHECK(round.unambiguous_range_mm() == doctest::Approx(5000.0));
        Tensor d({1}, 2500.0f);
        CHECK(phase_from_depth(d, round).data[0] == doctest::Approx(M_PI).epsilon(1e-6));
    }
    SUBCASE("phase vanishes with depth") {
        Tensor d({1}, 1e-3f);
        CHECK(phase_from_depth(d, cfg).data[0] < 1e-5f);
    }
    SUBCASE("wrapping depths are rejected with a count") {
        Tensor d({3}, 1000.0f);
        d.data[1] = static_cast<float>(cfg.unambiguous_range_mm() + 1.0);
        d.data[2] = static_cast<float>(cfg.unambiguous_range_mm() * 2);
        CHECK_THROWS_WITH_AS(phase_from_depth(d, cfg), doctest::Contains("2 depth value"),
                             std::invalid_argument);
    }
    SUBCASE("round trip with depth_from_phase") {
        RngState rng(8);
        Tensor d({16, 16});
        for (float& v : d.data)
            v = static_cast<float>(rng_uniform(rng, 100.0, cfg.unambiguous_range_mm() * 0.95));
        Tensor back = depth_from_phase(phase_from_depth(d, cfg), cfg);
        for (std::size_t i = 0; i < d.data.size(); ++i)
            CHECK(back.data[i] == doctest::Approx(d.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("per-view correlation magnitude matches the g*T/pi scale") {
    // L = 1 everywhere, depth tiny so the phase is ~0: C(psi=0) = 1.5 * g*T/pi
    ToFConfig cfg;
    cfg.gain = 20.0;
    cfg.integration_ms = 1.0;
    LightField lf = flat_field(1e-3, 1.0, 4, 3);
    Tensor pv = per_view_correlations(lf, cfg);
    double expect = 1.5 * 20.0 * 1.0 / M_PI;
    CHECK(pv.data[0] == doctest::Approx(expect).epsilon(1e-7));

    MicrolensMask ones = tile_mask(uniform_mask(3, 3, 4, 1.0f), 4, 4, 4, 0, 0);
    ViewCorrelations vc = correlation_stack(lf, ones, full_aperture(3, 3), cfg);
    CHECK(vc.averaged.images(0, 0, 0) == doctest::Approx(expect).epsilon(1e-7));
    CHECK(vc.per_view.dims == std::vector<int>{4, 3, 3, 4, 4});
}

TEST_CASE("all-zero mask annihilates the stack") {
    LightField lf = flat_field(1500.0, 0.8, 6, 3);
    MicrolensMask zeros = tile_mask(uniform_mask(3, 3, 6, 0.0f), 6, 6, 6, 0, 0);
    ViewCorrelations vc = correlation_stack(lf, zeros, full_aperture(3, 3), ToFConfig{});
    for (float v : vc.averaged.images.data) CHECK(v == 0.0f);
}

TEST_CASE("pinhole equals open aperture after throughput normalization on flat scenes") {
    LightField lf = flat_field(2000.0, 0.7, 8, 3);
    ToFConfig cfg;
    MaskPatch ones = uniform_mask(3, 3, 8, 1.0f);
    MaskPatch pin(3, 3, 8, 0.0f);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) pin.values(1, 1, r, c) = 1.0f;  // central view only

    Tensor full = correlation_stack(lf, tile_mask(ones, 8, 8, 8, 0, 0), full_aperture(3, 3), cfg)
                      .averaged.images;
    Tensor single = correlation_stack(lf, tile_mask(pin, 8, 8, 8, 0, 0), full_aperture(3, 3), cfg)
                        .averaged.images;
    for (std::size_t i = 0; i < full.data.size(); ++i)
        CHECK(static_cast<double>(single.data[i]) * 9.0 ==
              doctest::Approx(static_cast<double>(full.data[i])).epsilon(1e-6));
}

TEST_CASE("correlation_stack is linear in the mask") {
    LightField lf = flat_field(1800.0, 0.9, 8, 3);
    ToFConfig cfg;
    RngState rng(21);
    MaskPatch m1 = init_mask(parse_mask_pattern("gaussian:0.25"), 3, 3, 8, rng);
    MaskPatch m2 = init_mask(parse_mask_pattern("bernoulli:0.5"), 3, 3, 8, rng);
    double alpha = 0.3, beta = 0.7;
    MaskPatch mix(3, 3, 8, 0.0f);
    for (std::size_t i = 0; i < mix.values.data.size(); ++i)
        mix.values.data[i] = static_cast<float>(alpha * m1.values.data[i] + beta * m2.values.data[i]);

    auto run = [&](const MaskPatch& m) {
        return correlation_stack(lf, tile_mask(m, 8, 8, 8, 0, 0), full_aperture(3, 3), cfg)
            .averaged.images;
    };
    Tensor o1 = run(m1), o2 = run(m2), omix = run(mix);
    for (std::size_t i = 0; i < omix.data.size(); ++i) {
        double expect = alpha * o1.data[i] + beta * o2.data[i];
        CHECK(omix.data[i] == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("correlation_stack rejects mismatched shapes") {
    LightField lf = flat_field(1500.0, 0.5, 6, 3);
    MicrolensMask wrong = tile_mask(uniform_mask(5, 5, 6, 1.0f), 6, 6, 6, 0, 0);
    CHECK_THROWS_AS(correlation_stack(lf, wrong, full_aperture(5, 5), ToFConfig{}),
                    std::invalid_argument);
    MicrolensMask ok = tile_mask(uniform_mask(3, 3, 6, 1.0f), 6, 6, 6, 0, 0);
    CHECK_THROWS_AS(correlation_stack(lf, ok, full_aperture(5, 3), ToFConfig{}), std::invalid_argument);
}

TEST_CASE("add_noise contract") {
    LightField lf = flat_field(1500.0, 0.8, 50, 3);  // 4 * 50 * 50 = 1e4 samples
    ViewCorrelations vc =
        correlation_stack(lf, tile_mask(uniform_mask(3, 3, 50, 1.0f), 50, 50, 50, 0, 0),
                          full_aperture(3, 3), ToFConfig{});

    SUBCASE("sigma 0 is the identity") {
        NoiseConfig off = NoiseConfig::off();
        RngState rng(4);
        CorrelationStack out = add_noise(vc.averaged, off, rng);
        CHECK(out.images.data == vc.averaged.images.data);
    }
    SUBCASE("fixed seed reproduces") {
        NoiseConfig n;
        RngState r1(9), r2(9);
        CHECK(add_noise(vc.averaged, n, r1).images.data == add_noise(vc.averaged, n, r2).images.data);
    }
    SUBCASE("unit scale, sigma 3: empirical stddev within 5%") {
        NoiseConfig n{1.0, 1.0, 0.0, 3.0};
        RngState rng(77);
        CorrelationStack out = add_noise(vc.averaged, n, rng);
        double mean = 0;
        std::size_t count = out.images.data.size();  // 4 * 32 * 32 > 1e3 samples per field
        for (std::size_t i = 0; i < count; ++i)
            mean += out.images.data[i] - vc.averaged.images.data[i];
        mean /= static_cast<double>(count);
        double var = 0;
        for (std::size_t i = 0; i < count; ++i) {
            double d = out.images.data[i] - vc.averaged.images.data[i] - mean;
            var += d * d;
        }
        double sd = std::sqrt(var / static_cast<double>(count - 1));
        CHECK(std::abs(sd - 3.0) / 3.0 < 0.05);
    }
    SUBCASE("invalid bounds are rejected") {
        NoiseConfig bad{2.0, 1.0, 0.0, 3.0};
        RngState rng(1);
        CHECK_THROWS_AS(add_noise(vc.averaged, bad, rng), std::invalid_argument);
    }
}

TEST_CASE("mix_phase_oracle closed form") {
    CHECK(mix_phase_oracle(1.0, 2.1, 0.0, 0.4) == doctest::Approx(2.1).epsilon(1e-12));
    CHECK(mix_phase_oracle(0.5, 0.0, 0.5, M_PI / 2) == doctest::Approx(M_PI / 4).epsilon(1e-12));
    CHECK_THROWS_AS(mix_phase_oracle(0.0, 1.0, 0.0, 2.0), std::invalid_argument);

    // 3:1 mixture equals the four-bucket estimate of the summed correlations
    double a1 = 0.75, p1 = 0.3, a2 = 0.25, p2 = 2.1;
    CorrelationStack stack;
    stack.images = Tensor({4, 1, 1});
    for (int k = 0; k < 4; ++k) {
        double psi = kPsiOffsets[k];
        stack.images(k, 0, 0) = static_cast<float>(a1 * (0.5 + std::cos(p1 + psi)) +
                                                   a2 * (0.5 + std::cos(p2 + psi)));
    }
    PhaseEstimate pe = phase_estimate(stack);
    CHECK(std::abs(pe.phase(0, 0) - mix_phase_oracle(a1, p1, a2, p2)) < 1e-5);
}

TEST_CASE("edge pixels recover the mixture phase of the masked ray sums") {
    // two-layer edge, noise free, open mask: every pixel's recovered phase
    // must equal the closed-form mixture of its per-view contributions
    RngState rng(5);
    LayeredScene s = preset_scene(
        "edge", {{"fg", 1400.0}, {"bg", 2900.0}, {"size", 24}, {"texture", 0.2}}, rng);
    double B = baseline_for_max_disparity(1400.0, 2900.0, 5, 3.0);
    LightField lf = render_lightfield(s, 5, 5, B, 2900.0);
    ToFConfig cfg;
    MicrolensMask mask = tile_mask(uniform_mask(5, 5, 24, 1.0f), 24, 24, 24, 0, 0);
    ViewCorrelations vc = correlation_stack(lf, mask, full_aperture(5, 5), cfg);
    PhaseEstimate pe = phase_estimate(vc.averaged);

    Tensor phi_fg = phase_from_depth(Tensor({1}, 1400.0f), cfg);
    Tensor phi_bg = phase_from_depth(Tensor({1}, 2900.0f), cfg);

    int mixed = 0;
    for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 24; ++c) {
            double amp_fg = 0, amp_bg = 0;
            for (int u = 0; u < 5; ++u)
                for (int v = 0; v < 5; ++v) {
                    double a = lf.amplitude(u, v, r, c) * mask.at(u, v, r, c) / 25.0;
                    if (lf.view_depth(u, v, r, c) == 1400.0f) amp_fg += a;
                    else amp_bg += a;
                }
            if (amp_fg > 0 && amp_bg > 0) ++mixed;
            double expect = mix_phase_oracle(amp_bg, phi_bg.data[0], amp_fg, phi_fg.data[0]);
            CHECK(std::abs(pe.phase(r, c) - expect) < 1e-5);
            if (amp_fg > 0 && amp_bg > 0) {
                CHECK(pe.phase(r, c) > std::min<double>(phi_fg.data[0], phi_bg.data[0]));
                CHECK(pe.phase(r, c) < std::max<double>(phi_fg.data[0], phi_bg.data[0]));
            }
        }
    CHECK(mixed > 0);
}

TEST_CASE("residual path term is negligible as the lens model assumes") {
    ToFConfig cfg;
    LensGeometry geom{10.0, 5.0, 1000.0};

    SUBCASE("chief ray has zero residual") {
        ResidualPath rp = residual_path_delta(0.0, 3.0, geom, cfg);
        CHECK(rp.delta_mm == 0.0);
        CHECK(rp.phase_err_rad == 0.0);
        CHECK(rp.depth_bias_mm == 0.0);
    }
    SUBCASE("direct evaluation at the documented point") {
        ResidualPath rp = residual_path_delta(5.0, 0.0, geom, cfg);
        double expect =
            (std::sqrt(0.0 + 100.0) + std::sqrt(1000.0 * 1000.0 + 25.0)) -
            (std::sqrt(25.0 + 100.0) + 1000.0);
        CHECK(rp.delta_mm == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(rp.depth_bias_mm) < 1.0);
        CHECK(rp.depth_bias_mm == doctest::Approx(rp.delta_mm / 2.0).epsilon(1e-12));
    }
    SUBCASE("bias magnitude decreases monotonically in depth") {
        double u = 2.5, x = 5.0;
        double prev = 1e30;
        for (double z = 50.0; z <= 5000.0; z *= 1.15) {
            LensGeometry g{10.0, 5.0, z};
            double bias = std::abs(residual_path_delta(u, x, g, cfg).depth_bias_mm);
            CHECK(bias < prev);
            prev = bias;
        }
    }
    SUBCASE("|u| beyond the lens radius is rejected") {
        CHECK_THROWS_AS(residual_path_delta(6.0, 0.0, geom, cfg), std::invalid_argument);
    }
}
