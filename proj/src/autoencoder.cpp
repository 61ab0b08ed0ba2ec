#include "fpimpute/autoencoder.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace fpimpute {

std::string to_string(AutoencoderVariant v) {
    switch (v) {
        case AutoencoderVariant::Ae: return "ae";
        case AutoencoderVariant::Dae: return "dae";
        case AutoencoderVariant::Rae: return "rae";
    }
    return "ae";
}

nn::Mlp make_autoencoder_network(int features, const AutoencoderConfig& cfg, std::mt19937_64& rng) {
    std::vector<int> sizes{features};
    std::vector<nn::Activation> acts;
    for (int h : cfg.encoder_hidden) {
        sizes.push_back(h);
        acts.push_back(nn::Activation::Tanh);
    }
    sizes.push_back(cfg.latent_dim);
    acts.push_back(nn::Activation::Identity);
    for (int h : cfg.decoder_hidden) {
        sizes.push_back(h);
        acts.push_back(nn::Activation::Tanh);
    }
    sizes.push_back(features);
    acts.push_back(nn::Activation::Identity);

    nn::Mlp net(sizes, acts);
    auto init = nn::Mlp::glorot(sizes, rng);
    for (std::size_t i = 0; i < net.layers().size(); ++i) net.layers()[i].weight = init.layers()[i].weight;
    return net;
}

Matrix autoencoder_targets(AutoencoderVariant variant, const Matrix& clean, const Matrix& corrupted) {
    require_shape(clean.rows() == corrupted.rows() && clean.cols() == corrupted.cols(), "target shapes differ");
    if (variant == AutoencoderVariant::Rae) return clean - corrupted;
    return clean;
}

LossEvaluation masked_squared_loss(const nn::Mlp& net, const Matrix& inputs, const Matrix& targets,
                                   const MissingMatrix& missing) {
    require_shape(inputs.rows() == targets.rows() && inputs.cols() == targets.cols() &&
                      missing.rows() == inputs.rows() && missing.cols() == inputs.cols(),
                  "loss inputs disagree in shape");
    const auto trace = nn::forward_trace(net, inputs.transpose());
    Matrix residual = trace.output() - targets.transpose();  // K x B
    for (Eigen::Index j = 0; j < residual.cols(); ++j)
        for (Eigen::Index i = 0; i < residual.rows(); ++i)
            if (missing(j, i)) residual(i, j) = 0.0;
    const double b = static_cast<double>(inputs.rows());
    LossEvaluation ev;
    ev.value = 0.5 * residual.squaredNorm() / b;
    ev.grads = nn::backward(net, trace, residual / b).params;
    return ev;
}

Autoencoder::Autoencoder(AutoencoderVariant variant, AutoencoderConfig cfg) : variant_(variant), cfg_(std::move(cfg)) {
    if (cfg_.epochs < 0 || cfg_.batch_size < 1 || !(cfg_.learning_rate > 0.0) || cfg_.latent_dim < 1)
        throw ConfigError("invalid autoencoder configuration");
}

std::vector<double> Autoencoder::fit(const Matrix& filled, const MissingMatrix& missing) {
    require_shape(missing.rows() == filled.rows() && missing.cols() == filled.cols(), "mask shape does not match data");
    if (!filled.allFinite()) throw DataError("autoencoder input must be filled");
    std::mt19937_64 rng(cfg_.seed);
    net_ = make_autoencoder_network(static_cast<int>(filled.cols()), cfg_, rng);
    auto adam = nn::AdamState::for_network(net_, cfg_.learning_rate);
    std::normal_distribution<double> noise(0.0, cfg_.noise_std);

    const Eigen::Index n = filled.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::Index bs = std::min<Eigen::Index>(cfg_.batch_size, n);
    std::vector<double> losses;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min(bs, n - start);
            Matrix clean(len, filled.cols());
            MissingMatrix m(len, filled.cols());
            for (Eigen::Index r = 0; r < len; ++r) {
                const auto src = order[static_cast<std::size_t>(start + r)];
                clean.row(r) = filled.row(src);
                m.row(r) = missing.row(src);
            }
            Matrix input = clean;
            if (variant_ != AutoencoderVariant::Ae)
                for (Eigen::Index j = 0; j < input.cols(); ++j)
                    for (Eigen::Index i = 0; i < input.rows(); ++i)
                        if (!m(i, j)) input(i, j) += noise(rng);
            const auto ev = masked_squared_loss(net_, input, autoencoder_targets(variant_, clean, input), m);
            nn::adam_step(net_, ev.grads, adam);
            total += ev.value * static_cast<double>(len);
        }
        losses.push_back(total / static_cast<double>(n));
    }
    return losses;
}

Matrix Autoencoder::transform(const Matrix& filled, const MissingMatrix& missing) const {
    require_shape(missing.rows() == filled.rows() && missing.cols() == filled.cols(), "mask shape does not match data");
    if (net_.layers().empty()) throw ConfigError("autoencoder used before fit");
    Matrix out_t = nn::forward_batch(net_, filled.transpose());
    if (variant_ == AutoencoderVariant::Rae) out_t += filled.transpose();
    if (!out_t.allFinite()) throw NumericError("autoencoder produced a non-finite reconstruction");
    Matrix out = filled;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            if (missing(i, j)) out(i, j) = out_t(j, i);
    return out;
}

Matrix autoencoder_impute(const Matrix& filled, const MissingMatrix& missing, AutoencoderVariant variant,
                          const AutoencoderConfig& cfg) {
    Autoencoder ae(variant, cfg);
    ae.fit(filled, missing);
    return ae.transform(filled, missing);
}

}  // namespace fpimpute
