#pragma once

#include "fpimpute/common.hpp"

#include <random>
#include <span>
#include <vector>

namespace fpimpute::nn {

enum class Activation { Tanh, Identity };

struct Layer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Identity;
};

// Dense feedforward network. Batched calls take samples as columns.
class Mlp {
public:
    Mlp() = default;

    // Zero-initialised network; hidden layers tanh, output identity.
    explicit Mlp(std::vector<int> layer_sizes);
    Mlp(std::vector<int> layer_sizes, std::vector<Activation> activations);

    // Glorot-uniform weights, zero biases.
    static Mlp glorot(std::vector<int> layer_sizes, std::mt19937_64& rng);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t parameter_count() const;

    bool operator==(const Mlp& other) const;

private:
    std::vector<int> sizes_;
    std::vector<Layer> layers_;
};

struct MlpGradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static MlpGradients zeros_like(const Mlp& net);
    MlpGradients& operator+=(const MlpGradients& other);
    MlpGradients& operator*=(double s);
};

// Post-activation outputs of every layer; values[0] is the input batch.
struct ForwardTrace {
    std::vector<Matrix> values;
    const Matrix& output() const { return values.back(); }
};

struct BackwardResult {
    MlpGradients params;  // summed over the batch
    Matrix input_grad;
};

Vector forward(const Mlp& net, const Vector& input);
Matrix forward_batch(const Mlp& net, const Matrix& inputs);
ForwardTrace forward_trace(const Mlp& net, const Matrix& inputs);

BackwardResult backward(const Mlp& net, const ForwardTrace& trace, const Matrix& output_grad);
BackwardResult backward(const Mlp& net, const Vector& input, const Vector& output_grad);

// Flat views in layer order: weights (column-major) then bias, per layer.
std::vector<double> flatten(const Mlp& net);
void unflatten(Mlp& net, std::span<const double> flat);
std::vector<double> flatten(const MlpGradients& grads);

}  // namespace fpimpute::nn
