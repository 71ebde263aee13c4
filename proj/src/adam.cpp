#include "ctof/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ctof {

AdamState adam_init(const std::vector<int>& dims) {
    AdamState s;
    s.m = Tensor::zeros(dims);
    s.v = Tensor::zeros(dims);
    return s;
}

void adam_step(Tensor& params, const Tensor& grads, AdamState& state, double lr) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.data.size(); ++i) {
        double g = grads.data[i];
        double m = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * g;
        double v = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * g * g;
        state.m.data[i] = static_cast<float>(m);
        state.v.data[i] = static_cast<float>(v);
        double update = lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps);
        params.data[i] = static_cast<float>(static_cast<double>(params.data[i]) - update);
    }
}

}  // namespace ctof
