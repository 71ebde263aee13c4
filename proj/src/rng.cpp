#include "ctof/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ctof {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t RngState::next_u64() {
    std::uint64_t z = seed + kGolden * ++counter;
    return mix64(z);
}

double RngState::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

RngState RngState::split(std::uint64_t stream) const {
    return RngState(mix64(seed ^ mix64(stream + 0x5851F42D4C957F2Dull)), 0);
}

double rng_uniform(RngState& rng, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("rng_uniform: lo > hi");
    if (lo == hi) return lo;
    double v = lo + rng.next_unit() * (hi - lo);
    // half-open contract even if the product rounds up
    if (v >= hi) v = std::nextafter(hi, lo);
    return v;
}

double rng_gaussian_scalar(RngState& rng, double mean, double stddev) {
    if (stddev < 0) throw std::invalid_argument("rng_gaussian: negative stddev");
    // Box-Muller, fixed two draws per sample so the counter advance is
    // data-independent
    double u1 = static_cast<double>((rng.next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = rng.next_unit();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
}

Tensor rng_gaussian(RngState& rng, std::vector<int> dims, double mean, double stddev) {
    if (stddev < 0) throw std::invalid_argument("rng_gaussian: negative stddev");
    Tensor t(std::move(dims));
    for (float& v : t.data) v = static_cast<float>(rng_gaussian_scalar(rng, mean, stddev));
    return t;
}

}  // namespace ctof
