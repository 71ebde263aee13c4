#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>

#include "ctof/refiner.hpp"

using namespace ctof;

namespace {

MicrolensMask uniform_tiled(int U, int V, int side, float v = 1.0f) {
    return tile_mask(MaskPatch(U, V, side, v), side, side, side, 0, 0);
}

void randomize_all_layers(RefinerWeights& w, RngState& rng) {
    for (ConvLayer& l : w.layers) {
        double stddev = std::sqrt(2.0 / (l.kernel.dims[1] * 9.0));
        l.kernel = rng_gaussian(rng, l.kernel.dims, 0.0, stddev);
        l.bias = rng_gaussian(rng, l.bias.dims, 0.0, 0.05);
    }
}

}  // namespace

TEST_CASE("initialization contract") {
    RefinerConfig cfg;
    cfg.hidden_channels = 32;
    RngState r1(5), r2(5);
    RefinerWeights a = refine_init(cfg, 81, r1);
    RefinerWeights b = refine_init(cfg, 81, r2);

    // final layer zeroed
    for (float v : a.layers.back().kernel.data) CHECK(v == 0.0f);
    for (float v : a.layers.back().bias.data) CHECK(v == 0.0f);

    // same seed, same weights
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        CHECK(a.layers[l].kernel.data == b.layers[l].kernel.data);

    // variance-preserving init on a >= 1e4 sample layer
    const Tensor& k0 = a.layers[0].kernel;  // 32 x 82 x 3 x 3 = 23616 values
    REQUIRE(k0.numel() >= 10000);
    double mean = 0;
    for (float v : k0.data) mean += v;
    mean /= static_cast<double>(k0.data.size());
    double var = 0;
    for (float v : k0.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(k0.data.size() - 1);
    double expect = 2.0 / (82.0 * 9.0);
    CHECK(std::abs(var - expect) / expect < 0.2);
}

TEST_CASE("zero-initialized refiner is the rectified identity") {
    RefinerConfig cfg;
    cfg.hidden_channels = 8;
    RngState rng(7);
    RefinerWeights w = refine_init(cfg, 9, rng);
    MicrolensMask mask = uniform_tiled(3, 3, 16);

    RngState drng(9);
    Tensor depth = rng_gaussian(drng, {16, 16}, 0.0, 100.0);  // mixed signs
    Tensor out = refine_forward(depth, mask, w);
    for (std::size_t i = 0; i < depth.data.size(); ++i)
        CHECK(out.data[i] == std::max(0.0f, depth.data[i]));

    Tensor negative({16, 16}, -5.0f);
    Tensor zero = refine_forward(negative, mask, w);
    for (float v : zero.data) CHECK(v == 0.0f);
}

TEST_CASE("fully convolutional weights run on other input sizes") {
    RefinerConfig cfg;  // default 16 channels, 4 layers, downsample
    RngState rng(11);
    RefinerWeights w = refine_init(cfg, 9, rng);
    randomize_all_layers(w, rng);

    for (int side : {64, 128, 33}) {
        MicrolensMask mask = uniform_tiled(3, 3, side);
        Tensor depth({side, side}, 1000.0f);
        Tensor out = refine_forward(depth, mask, w);
        CHECK(out.dims == std::vector<int>{side, side});
        CHECK(out.all_finite());
    }

    MicrolensMask small = uniform_tiled(3, 3, 4);
    Tensor tiny({4, 4}, 10.0f);
    CHECK_THROWS_AS(refine_forward(tiny, small, w), std::invalid_argument);
}

TEST_CASE("output depends on the mask conditioning channels") {
    RefinerConfig cfg;
    cfg.hidden_channels = 8;
    cfg.num_layers = 3;
    RngState rng(13);
    RefinerWeights w = refine_init(cfg, 9, rng);
    randomize_all_layers(w, rng);

    RngState mrng(17);
    MaskPatch patch = init_mask(parse_mask_pattern("gaussian:0.3"), 3, 3, 16, mrng);
    MaskPatch permuted = patch;
    // swap two view planes
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c)
            std::swap(permuted.values(0, 0, r, c), permuted.values(2, 1, r, c));

    Tensor depth({16, 16}, 1500.0f);
    Tensor out_a = refine_forward(depth, tile_mask(patch, 16, 16, 16, 0, 0), w);
    Tensor out_b = refine_forward(depth, tile_mask(permuted, 16, 16, 16, 0, 0), w);
    bool differs = false;
    for (std::size_t i = 0; i < out_a.data.size(); ++i)
        if (out_a.data[i] != out_b.data[i]) differs = true;
    CHECK(differs);
}

TEST_CASE("weights container round trip") {
    RefinerConfig cfg;
    cfg.hidden_channels = 6;
    cfg.num_layers = 3;
    cfg.downsample = false;
    RngState rng(19);
    RefinerWeights w = refine_init(cfg, 25, rng);
    randomize_all_layers(w, rng);

    refiner_save(w, "refiner_io_test.rfw");
    RefinerWeights back = refiner_load("refiner_io_test.rfw");
    CHECK(back.cfg.hidden_channels == 6);
    CHECK(back.cfg.num_layers == 3);
    CHECK(back.cfg.downsample == false);
    CHECK(back.mask_channels == 25);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        CHECK(back.layers[l].kernel.data == w.layers[l].kernel.data);
        CHECK(back.layers[l].bias.data == w.layers[l].bias.data);
    }

    CHECK_THROWS_AS(refiner_load("no_such_file.rfw"), std::runtime_error);
}

TEST_CASE("config validation") {
    RefinerConfig bad;
    bad.num_layers = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    RngState rng(1);
    RefinerConfig cfg;
    RefinerWeights w = refine_init(cfg, 9, rng);
    w.layers.pop_back();
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
