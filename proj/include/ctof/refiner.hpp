#pragma once

#include <string>
#include <vector>

#include "ctof/mask.hpp"
#include "ctof/rng.hpp"
#include "ctof/tape.hpp"
#include "ctof/tensor.hpp"

namespace ctof {

// Small convolutional residual network. 3x3 kernels with reflect padding;
// optionally one stride-2 stage with nearest-neighbor upsample and a skip
// connection back to full resolution. Fully convolutional, so weights trained
// on patches run on any input of at least 8x8.
struct RefinerConfig {
    int hidden_channels = 16;
    int num_layers = 4;
    bool downsample = true;
    void validate() const;
};

struct ConvLayer {
    Tensor kernel;  // [Cout, Cin, 3, 3]
    Tensor bias;    // [Cout]
};

struct RefinerWeights {
    RefinerConfig cfg;
    int mask_channels = 0;  // U*V
    std::vector<ConvLayer> layers;

    void validate() const;
    std::int64_t parameter_count() const;
};

// Kernels ~ N(0, 2/fan_in), biases zero, final layer zeroed so the initial
// network is the identity residual.
RefinerWeights refine_init(const RefinerConfig& cfg, int mask_channels, RngState& rng);

// D* = max(0, D + residual(D, mask)). Input is the depth map concatenated
// with the per-pixel mask flattened to U*V channels.
Tensor refine_forward(const Tensor& depth, const MicrolensMask& mask, const RefinerWeights& w);

// tape building blocks shared by training and the eager wrapper
struct RefinerNodes {
    std::vector<int> kernels;
    std::vector<int> biases;
};
RefinerNodes refiner_constants(ad::Tape& tape, const RefinerWeights& w);
RefinerNodes refiner_leaves(ad::Tape& tape, const RefinerWeights& w);
int refine_forward_tape(ad::Tape& tape, const RefinerWeights& topology, const RefinerNodes& nodes,
                        int depth_node, int mask_channels_node);

// one-file container: text manifest of layer shapes, then TNS1 blobs
void refiner_save(const RefinerWeights& w, const std::string& path);
RefinerWeights refiner_load(const std::string& path);

}  // namespace ctof
