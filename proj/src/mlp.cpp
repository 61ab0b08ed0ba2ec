#include "fpimpute/mlp.hpp"

#include <cmath>

namespace fpimpute::nn {

namespace {

std::vector<Activation> default_activations(std::size_t layer_count) {
    std::vector<Activation> acts(layer_count, Activation::Tanh);
    if (!acts.empty()) acts.back() = Activation::Identity;
    return acts;
}

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw ConfigError("an Mlp needs at least an input and an output size");
    for (int s : sizes)
        if (s <= 0) throw ConfigError("Mlp layer sizes must be positive");
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes)
    : Mlp(layer_sizes, default_activations(layer_sizes.size() > 0 ? layer_sizes.size() - 1 : 0)) {}

Mlp::Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations) : sizes_(std::move(layer_sizes)) {
    check_sizes(sizes_);
    if (activations.size() != sizes_.size() - 1)
        throw ConfigError("one activation per layer is required");
    layers_.reserve(sizes_.size() - 1);
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
        layers_.push_back(Layer{Matrix::Zero(sizes_[i + 1], sizes_[i]), Vector::Zero(sizes_[i + 1]), activations[i]});
}

Mlp Mlp::glorot(std::vector<int> layer_sizes, std::mt19937_64& rng) {
    Mlp net(std::move(layer_sizes));
    for (auto& layer : net.layers_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = dist(rng);
    }
    return net;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

bool Mlp::operator==(const Mlp& other) const {
    if (sizes_ != other.sizes_) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.activation != b.activation || a.weight != b.weight || a.bias != b.bias) return false;
    }
    return true;
}

MlpGradients MlpGradients::zeros_like(const Mlp& net) {
    MlpGradients g;
    for (const auto& l : net.layers()) {
        g.weights.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        g.biases.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
    require_shape(weights.size() == other.weights.size(), "gradient layer count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] += other.weights[i];
        biases[i] += other.biases[i];
    }
    return *this;
}

MlpGradients& MlpGradients::operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

ForwardTrace forward_trace(const Mlp& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_size())
        throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(net.input_size()));
    ForwardTrace trace;
    trace.values.reserve(net.layers().size() + 1);
    trace.values.push_back(inputs);
    for (const auto& layer : net.layers()) {
        Matrix z = layer.weight * trace.values.back();
        z.colwise() += layer.bias;
        if (layer.activation == Activation::Tanh) z = z.array().tanh().matrix();
        trace.values.push_back(std::move(z));
    }
    return trace;
}

Matrix forward_batch(const Mlp& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_size())
        throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(net.input_size()));
    Matrix current = inputs;
    for (const auto& layer : net.layers()) {
        Matrix z = layer.weight * current;
        z.colwise() += layer.bias;
        if (layer.activation == Activation::Tanh) z = z.array().tanh().matrix();
        current = std::move(z);
    }
    return current;
}

Vector forward(const Mlp& net, const Vector& input) {
    return forward_batch(net, Matrix(input)).col(0);
}

BackwardResult backward(const Mlp& net, const ForwardTrace& trace, const Matrix& output_grad) {
    const auto& layers = net.layers();
    require_shape(trace.values.size() == layers.size() + 1, "trace does not belong to this network");
    require_shape(output_grad.rows() == net.output_size() && output_grad.cols() == trace.values.front().cols(),
                  "output gradient shape does not match forward output");

    BackwardResult result;
    result.params.weights.resize(layers.size());
    result.params.biases.resize(layers.size());

    Matrix delta = output_grad;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        if (layer.activation == Activation::Tanh)
            delta.array() *= 1.0 - trace.values[k + 1].array().square();
        result.params.weights[k].noalias() = delta * trace.values[k].transpose();
        result.params.biases[k] = delta.rowwise().sum();
        Matrix upstream = layer.weight.transpose() * delta;
        delta = std::move(upstream);
    }
    result.input_grad = std::move(delta);
    return result;
}

BackwardResult backward(const Mlp& net, const Vector& input, const Vector& output_grad) {
    return backward(net, forward_trace(net, Matrix(input)), Matrix(output_grad));
}

std::vector<double> flatten(const Mlp& net) {
    std::vector<double> flat;
    flat.reserve(net.parameter_count());
    for (const auto& l : net.layers()) {
        flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
        flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return flat;
}

void unflatten(Mlp& net, std::span<const double> flat) {
    require_shape(flat.size() == net.parameter_count(), "flat parameter vector has the wrong length");
    std::size_t pos = 0;
    for (auto& l : net.layers()) {
        std::copy_n(flat.data() + pos, l.weight.size(), l.weight.data());
        pos += static_cast<std::size_t>(l.weight.size());
        std::copy_n(flat.data() + pos, l.bias.size(), l.bias.data());
        pos += static_cast<std::size_t>(l.bias.size());
    }
}

std::vector<double> flatten(const MlpGradients& grads) {
    std::vector<double> flat;
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
        flat.insert(flat.end(), grads.weights[i].data(), grads.weights[i].data() + grads.weights[i].size());
        flat.insert(flat.end(), grads.biases[i].data(), grads.biases[i].data() + grads.biases[i].size());
    }
    return flat;
}

}  // namespace fpimpute::nn
