#pragma once

#include <cstdint>

#include "ctof/tensor.hpp"

namespace ctof {

// Adaptive-moment state for one parameter tensor.
struct AdamState {
    Tensor m;  // first moment
    Tensor v;  // second moment
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState adam_init(const std::vector<int>& dims);

// Standard bias-corrected update; math runs in 64-bit, storage stays float32.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state, double lr);

}  // namespace ctof
