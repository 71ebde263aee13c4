#include <doctest.h>

#include <stdexcept>

#include <set>

#include "ctof/mask.hpp"

using namespace ctof;

namespace {

MaskPatch make(const std::string& spec, int U = 9, int V = 9, int P = 8, std::uint64_t seed = 3) {
    RngState rng(seed);
    return init_mask(parse_mask_pattern(spec), U, V, P, rng);
}

int open_cells_per_pixel(const MaskPatch& m, int r, int c) {
    int n = 0;
    for (int u = 0; u < m.views_u; ++u)
        for (int v = 0; v < m.views_v; ++v)
            if (m.values(u, v, r, c) > 0.5f) ++n;
    return n;
}

}  // namespace

TEST_CASE("circle apertures open the documented cell counts") {
    MaskPatch pin = make("circle:1");
    MaskPatch c5 = make("circle:5");
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) {
            CHECK(open_cells_per_pixel(pin, r, c) == 1);
            CHECK(open_cells_per_pixel(c5, r, c) == 13);
        }
    // the single open cell is the chief ray
    CHECK(pin.values(4, 4, 0, 0) == 1.0f);

    CHECK(throughput(pin) == doctest::Approx(1.0 / 81.0).epsilon(1e-7));
    CHECK(throughput(c5) == doctest::Approx(13.0 / 81.0).epsilon(1e-7));
    CHECK(throughput(make("ones")) == doctest::Approx(1.0));
}

TEST_CASE("init_mask parameter validation") {
    RngState rng(1);
    CHECK_THROWS_AS(init_mask(parse_mask_pattern("circle:0"), 9, 9, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_mask(parse_mask_pattern("circle:10"), 9, 9, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(init_mask(parse_mask_pattern("bernoulli:1.5"), 9, 9, 8, rng), std::invalid_argument);
    CHECK_THROWS_AS(parse_mask_pattern("nonsense"), std::invalid_argument);
}

TEST_CASE("random patterns are within bounds and deterministic") {
    for (const char* spec : {"bernoulli:0.5", "gaussian:0.25", "barcode:2"}) {
        MaskPatch a = make(spec, 9, 9, 8, 5);
        MaskPatch b = make(spec, 9, 9, 8, 5);
        CHECK(a.values.data == b.values.data);
        for (float v : a.values.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    MaskPatch bern = make("bernoulli:0.5", 9, 9, 16, 7);
    for (float v : bern.values.data) CHECK((v == 0.0f || v == 1.0f));
}

TEST_CASE("tile_mask views the centered crop toroidally") {
    MaskPatch p = make("gaussian:0.25", 3, 3, 8, 11);

    SUBCASE("identity view") {
        MicrolensMask m = tile_mask(p, 8, 8, 8, 0, 0);
        for (int u = 0; u < 3; ++u)
            for (int r = 0; r < 8; ++r)
                for (int c = 0; c < 8; ++c) CHECK(m.at(u, 0, r, c) == p.values(u, 0, r, c));
    }
    SUBCASE("2x tiling repeats each value four times") {
        MicrolensMask m = tile_mask(p, 16, 16, 8, 0, 0);
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) CHECK(m.at(1, 2, r, c) == p.values(1, 2, r % 8, c % 8));
    }
    SUBCASE("offsets are periodic in the crop side") {
        MicrolensMask a = tile_mask(p, 12, 12, 4, 3, 1);
        MicrolensMask b = tile_mask(p, 12, 12, 4, 3 + 4, 1 + 4);
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) CHECK(a.at(0, 0, r, c) == b.at(0, 0, r, c));
    }
    SUBCASE("shift by the crop side leaves values unchanged") {
        MicrolensMask m = tile_mask(p, 20, 20, 4, 2, 3);
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) CHECK(m.at(2, 1, r, c) == m.at(2, 1, r + 4, c + 4));
    }
    SUBCASE("crop larger than patch is rejected") {
        CHECK_THROWS_AS(tile_mask(p, 8, 8, 9, 0, 0), std::invalid_argument);
    }
}

TEST_CASE("project_box clamps and is idempotent") {
    MaskPatch p(2, 2, 2, 0.5f);
    p.values(0, 0, 0, 0) = 1.7f;
    p.values(0, 1, 0, 0) = -0.2f;
    MaskPatch q = project_box(p);
    CHECK(q.values(0, 0, 0, 0) == 1.0f);
    CHECK(q.values(0, 1, 0, 0) == 0.0f);
    CHECK(q.values(1, 1, 1, 1) == 0.5f);
    MaskPatch r = project_box(q);
    CHECK(r.values.data == q.values.data);
}

TEST_CASE("binarize thresholds and reports throughput") {
    MaskPatch p(3, 3, 4, 0.6f);
    BinarizeResult res = binarize(p, 0.5);
    for (float v : res.patch.values.data) CHECK(v == 1.0f);
    CHECK(res.throughput_before == doctest::Approx(0.6));
    CHECK(res.throughput_after == doctest::Approx(1.0));

    // already-binary circle mask is a fixed point
    MaskPatch c5 = make("circle:5");
    BinarizeResult fixed = binarize(c5, 0.5);
    CHECK(fixed.patch.values.data == c5.values.data);
    BinarizeResult twice = binarize(fixed.patch, 0.5);
    CHECK(twice.patch.values.data == fixed.patch.values.data);
    CHECK(fixed.throughput_after >= 0.0);
    CHECK(fixed.throughput_after <= 1.0);

    CHECK_THROWS_AS(binarize(p, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(binarize(p, 1.0), std::invalid_argument);
}
