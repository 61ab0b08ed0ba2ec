#pragma once

#include "fpimpute/adam.hpp"
#include "fpimpute/dataset.hpp"
#include "fpimpute/missingness.hpp"
#include "fpimpute/mlp.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace fpimpute {

// Likelihood attached to each reconstructed feature.
enum class OutputHead { Gaussian, Bernoulli };

std::vector<OutputHead> heads_for(const std::vector<FeatureSchema>& schema);

struct ModelShape {
    int latent_dim = 100;
    std::vector<int> encoder_hidden{128, 64};
    std::vector<int> decoder_hidden{64, 128};
    // Std of the reparameterisation noise; 0.1 is a variance of 0.01.
    double sample_noise_std = 0.1;
    int mc_samples = 1;
    // Latent term E_q[log p(z)] - E_q[log q(z)]: closed form (-KL of the
    // encoder Gaussian from the prior) when true, otherwise evaluated at the
    // reparameterised sample.
    bool analytic_kl = true;
};

struct FitConfig {
    int epochs = 100;
    int batch_size = 50;
    double learning_rate = 1e-3;
    int inference_count = 2;
    int training_interval = 5;
    InitPolicy init_policy = InitPolicy::Mean;
    std::uint64_t seed = 0;

    void validate() const;
};

struct InferenceOptions {
    int iterations = 2;
    // Convergence mode: iterate until the largest masked-cell change of a row
    // drops below `tolerance`, at most `max_iterations` times.
    bool until_converged = false;
    double tolerance = 1e-5;
    int max_iterations = 50;
};

struct LatentGaussian {
    Vector mean;
    Vector var;
};

struct FeatureGaussian {
    Vector mean;
    Vector var;
};

struct InferenceTrace {
    Matrix imputed;                            // n x K
    std::vector<Vector> max_change;            // per iteration, per row
    std::vector<int> iterations_used;          // per row
};

struct ObjectiveGradients {
    nn::MlpGradients encoder_mean;
    nn::MlpGradients encoder_logvar;
    nn::MlpGradients decoder_mean;
    nn::MlpGradients decoder_logvar;
};

struct ObjectiveEvaluation {
    double value = 0.0;  // batch mean
    Vector per_row;
    ObjectiveGradients grads;  // d value / d weights
};

struct FitResult {
    Matrix imputed;
    std::vector<double> epoch_objectives;
    std::size_t m_steps = 0;
    std::size_t e_steps = 0;
};

// Encoder h (mean) and l (log-variance) map a filled row to q(z); decoder
// f (mean) and g (log-variance) map z back to per-feature likelihoods. Missing
// cells are imputed by alternating encode-mean / decode-mean on the filled row.
class GenerativeImputer {
public:
    GenerativeImputer(std::vector<OutputHead> heads, ModelShape shape, std::uint64_t seed);

    int feature_count() const { return static_cast<int>(heads_.size()); }
    int latent_dim() const { return shape_.latent_dim; }
    const ModelShape& shape() const { return shape_; }
    const std::vector<OutputHead>& heads() const { return heads_; }

    nn::Mlp& encoder_mean() { return h_; }
    nn::Mlp& encoder_logvar() { return l_; }
    nn::Mlp& decoder_mean() { return f_; }
    nn::Mlp& decoder_logvar() { return g_; }
    const nn::Mlp& encoder_mean() const { return h_; }
    const nn::Mlp& encoder_logvar() const { return l_; }
    const nn::Mlp& decoder_mean() const { return f_; }
    const nn::Mlp& decoder_logvar() const { return g_; }

    LatentGaussian encode(const Vector& row_filled) const;
    FeatureGaussian decode(const Vector& z) const;
    // Expected feature value: the mean for Gaussian heads, the logistic of the
    // mean for Bernoulli heads (clamped strictly inside (0, 1)).
    Vector expected_values(const Vector& decoded_mean) const;

    Vector fixed_point_impute(const Vector& row, const Eigen::Array<bool, Eigen::Dynamic, 1>& missing_row,
                              int n_iters) const;
    // Batched fixed-point imputation; rows are n x K and already filled.
    Matrix impute_rows(const Matrix& rows, const MissingMatrix& missing, int n_iters) const;
    Matrix transform(const Matrix& rows, const MissingMatrix& missing, const InferenceOptions& options) const;
    InferenceTrace transform_with_trace(const Matrix& rows, const MissingMatrix& missing,
                                        const InferenceOptions& options) const;

    // One-sample estimate of the approximated log-likelihood, averaged over rows.
    double objective(const Matrix& batch_rows, std::mt19937_64& rng) const;
    // Same estimate with fixed standard-normal draws `noise` (J x B); the
    // reparameterised sample is mean + sample_noise_std * noise * sqrt(var).
    ObjectiveEvaluation evaluate_objective(const Matrix& batch_rows, const Matrix& noise,
                                           bool with_gradients = true) const;

    FitResult fit(const Matrix& train_filled, const MissingMatrix& missing, const FitConfig& cfg);

    void write(std::ostream& out) const;
    static GenerativeImputer read(std::istream& in);

private:
    GenerativeImputer() = default;
    void check_rows(const Matrix& rows) const;

    std::vector<OutputHead> heads_;
    ModelShape shape_;
    nn::Mlp h_, l_, f_, g_;
    std::array<nn::AdamState, 4> adam_;
};

double log_standard_normal(const Vector& z);
double logistic(double x);

}  // namespace fpimpute
