#pragma once

#include <cstdint>

#include "ctof/tensor.hpp"

namespace ctof {

// Counter-based generator: output is a pure function of (seed, counter), so
// streams can be split per parallel task and replayed independently of thread
// scheduling.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    RngState() = default;
    explicit RngState(std::uint64_t s, std::uint64_t c = 0) : seed(s), counter(c) {}

    std::uint64_t next_u64();
    // uniform in [0, 1)
    double next_unit();
    // independent child stream; does not advance this state
    RngState split(std::uint64_t stream) const;
};

double rng_uniform(RngState& rng, double lo, double hi);
double rng_gaussian_scalar(RngState& rng, double mean, double stddev);
Tensor rng_gaussian(RngState& rng, std::vector<int> dims, double mean, double stddev);

}  // namespace ctof
