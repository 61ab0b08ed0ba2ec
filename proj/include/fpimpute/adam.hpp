#pragma once

#include "fpimpute/mlp.hpp"

#include <cstdint>

namespace fpimpute::nn {

// Adam with bias correction. Moments mirror the parameter shapes of one Mlp.
struct AdamState {
    std::uint64_t step_count = 0;
    MlpGradients first_moment;
    MlpGradients second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-3;

    static AdamState for_network(const Mlp& net, double learning_rate = 1e-3);
};

// Descends along `grads`. Components whose gradient is exactly zero are left
// untouched (parameter and moments), so an all-zero gradient is always a no-op
// on the parameters. Throws NumericError naming the layer on a non-finite gradient.
void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state);

}  // namespace fpimpute::nn
