#include "fpimpute/adam.hpp"

#include <cmath>

namespace fpimpute::nn {

AdamState AdamState::for_network(const Mlp& net, double learning_rate) {
    AdamState s;
    s.first_moment = MlpGradients::zeros_like(net);
    s.second_moment = MlpGradients::zeros_like(net);
    s.learning_rate = learning_rate;
    return s;
}

namespace {

template <typename Param, typename Grad>
void update(Param& p, const Grad& g, Param& m, Param& v, const AdamState& s, double c1, double c2) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double gi = g.data()[i];
        if (gi == 0.0) continue;
        double& mi = m.data()[i];
        double& vi = v.data()[i];
        mi = s.beta1 * mi + (1.0 - s.beta1) * gi;
        vi = s.beta2 * vi + (1.0 - s.beta2) * gi * gi;
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        p.data()[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

}  // namespace

void adam_step(Mlp& net, const MlpGradients& grads, AdamState& state) {
    auto& layers = net.layers();
    require_shape(grads.weights.size() == layers.size() && state.first_moment.weights.size() == layers.size() &&
                      state.second_moment.weights.size() == layers.size(),
                  "Adam state or gradients do not match the network");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        require_shape(grads.weights[k].rows() == layers[k].weight.rows() &&
                          grads.weights[k].cols() == layers[k].weight.cols() &&
                          grads.biases[k].size() == layers[k].bias.size() &&
                          state.first_moment.weights[k].size() == layers[k].weight.size() &&
                          state.second_moment.biases[k].size() == layers[k].bias.size(),
                      "Adam shape mismatch at layer " + std::to_string(k));
        if (!grads.weights[k].allFinite() || !grads.biases[k].allFinite())
            throw NumericError("non-finite gradient in layer " + std::to_string(k));
    }

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        update(layers[k].weight, grads.weights[k], state.first_moment.weights[k], state.second_moment.weights[k], state,
               c1, c2);
        update(layers[k].bias, grads.biases[k], state.first_moment.biases[k], state.second_moment.biases[k], state, c1,
               c2);
    }
}

}  // namespace fpimpute::nn
