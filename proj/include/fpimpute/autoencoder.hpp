#pragma once

#include "fpimpute/adam.hpp"
#include "fpimpute/common.hpp"
#include "fpimpute/mlp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fpimpute {

enum class AutoencoderVariant { Ae, Dae, Rae };

std::string to_string(AutoencoderVariant v);

struct AutoencoderConfig {
    int latent_dim = 100;
    std::vector<int> encoder_hidden{128, 64};
    std::vector<int> decoder_hidden{64, 128};
    int epochs = 100;
    int batch_size = 50;
    double learning_rate = 1e-3;
    double noise_std = 0.1;  // corruption of observed entries (dae, rae)
    std::uint64_t seed = 0;
};

// Encoder and decoder stacked into one network:
// K -> enc hidden (tanh) -> latent (identity) -> dec hidden (tanh) -> K (identity).
nn::Mlp make_autoencoder_network(int features, const AutoencoderConfig& cfg, std::mt19937_64& rng);

// Training target for one batch: clean for ae/dae, clean - corrupted for rae.
Matrix autoencoder_targets(AutoencoderVariant variant, const Matrix& clean, const Matrix& corrupted);

struct LossEvaluation {
    double value = 0.0;
    nn::MlpGradients grads;
};

// 1/(2B) sum over observed cells of (net(input) - target)^2. Rows are samples.
LossEvaluation masked_squared_loss(const nn::Mlp& net, const Matrix& inputs, const Matrix& targets,
                                   const MissingMatrix& missing);

class Autoencoder {
public:
    Autoencoder(AutoencoderVariant variant, AutoencoderConfig cfg);

    // `filled` has every masked cell already filled (means); the loss only
    // covers observed cells.
    std::vector<double> fit(const Matrix& filled, const MissingMatrix& missing);
    // Masked cells get the reconstruction (ae, dae) or input + residual (rae).
    Matrix transform(const Matrix& filled, const MissingMatrix& missing) const;

    const nn::Mlp& network() const { return net_; }

private:
    AutoencoderVariant variant_;
    AutoencoderConfig cfg_;
    nn::Mlp net_;
};

Matrix autoencoder_impute(const Matrix& filled, const MissingMatrix& missing, AutoencoderVariant variant,
                          const AutoencoderConfig& cfg);

}  // namespace fpimpute
