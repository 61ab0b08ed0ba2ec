#include "fpimpute/autoencoder.hpp"
#include "fpimpute/matrix_completion.hpp"
#include "fpimpute/missingness.hpp"
#include "fpimpute/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace fpimpute;

namespace {

Matrix rank_one_plus_offset(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
    const Matrix u = testing::normal_matrix(n, 1, rng);
    const Matrix v = testing::normal_matrix(1, k, rng);
    const Matrix offset = testing::normal_matrix(1, k, rng);
    return (u * v).rowwise() + offset.row(0);
}

double masked_max_error(const Matrix& a, const Matrix& b, const MissingMatrix& m) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (m.data()[i]) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

}  // namespace

TEST_CASE("soft threshold") {
    const Vector s = (Vector(2) << 3.0, 1.0).finished();
    CHECK(soft_threshold(s, 1.0) == (Vector(2) << 2.0, 0.0).finished());
    CHECK(soft_threshold(s, 0.0) == s);
    CHECK(soft_threshold(s, 10.0).isZero(0.0));
    CHECK(nuclear_norm((Matrix(2, 2) << 3, 0, 0, -4).finished()) == doctest::Approx(7.0));
}

TEST_CASE("iterative pca recovers a rank-one matrix") {
    std::mt19937_64 rng(18);
    const Matrix truth = rank_one_plus_offset(40, 6, rng);
    const MissingMatrix miss = testing::random_mask(40, 6, 0.15, rng, false);
    const auto res = pca_impute(truth, miss, 1, 20000, 1e-13);
    CHECK(masked_max_error(res.imputed, truth, miss) < 1e-6);
    CHECK(testing::observed_bit_exact(res.imputed, truth, miss));
    CHECK(res.components.cols() == 1);
    CHECK(res.components.col(0).norm() == doctest::Approx(1.0));

    // Projecting fresh rows of the same structure through the fitted model.
    const MissingMatrix test_miss = testing::random_mask(40, 6, 0.15, rng, false);
    const Matrix projected = pca_project_impute(truth, test_miss, res.mean, res.components, 20000, 1e-13);
    CHECK(masked_max_error(projected, truth, test_miss) < 1e-5);
}

TEST_CASE("full-rank pca leaves the mean fills in place") {
    std::mt19937_64 rng(19);
    const Matrix data = testing::normal_matrix(10, 4, rng);
    const MissingMatrix miss = testing::random_mask(10, 4, 0.2, rng);
    const auto res = pca_impute(data, miss, 4);
    CHECK((res.imputed - apply_mask(data, miss, InitPolicy::Mean)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(pca_impute(data, miss, 0), ConfigError);
    CHECK_THROWS_AS(pca_impute(data, miss, 5), ConfigError);
}

TEST_CASE("rank for variance") {
    std::mt19937_64 rng(20);
    const Matrix r1 = rank_one_plus_offset(30, 5, rng);
    CHECK(rank_for_variance(r1, MissingMatrix::Constant(30, 5, false), 0.9) == 1);
    const Matrix noise = testing::normal_matrix(200, 5, rng);
    CHECK(rank_for_variance(noise, MissingMatrix::Constant(200, 5, false), 0.999) == 5);
}

TEST_CASE("soft-impute recovers a low-rank matrix") {
    std::mt19937_64 rng(22);
    const Matrix truth = testing::normal_matrix(40, 1, rng) * testing::normal_matrix(1, 10, rng);
    const MissingMatrix miss = testing::random_mask(40, 10, 0.2, rng, false);
    const auto lambdas = default_lambda_schedule(truth, miss, 12, 0.5, 1e-4);
    CHECK(lambdas.size() == 12u);
    CHECK(std::is_sorted(lambdas.rbegin(), lambdas.rend()));
    const auto res = soft_impute(truth, miss, lambdas, 2000, 1e-12);
    double err = 0.0, norm = 0.0;
    for (Eigen::Index i = 0; i < miss.size(); ++i)
        if (miss.data()[i]) {
            err += std::pow(res.imputed.data()[i] - truth.data()[i], 2);
            norm += std::pow(truth.data()[i], 2);
        }
    CHECK(std::sqrt(err / norm) < 0.05);
    CHECK(testing::observed_bit_exact(res.imputed, truth, miss));
}

TEST_CASE("soft-impute objective never increases at a fixed lambda") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix data = testing::normal_matrix(15, 6, rng);
        const MissingMatrix miss = testing::random_mask(15, 6, 0.3, rng);
        const auto res = soft_impute(data, miss, {2.0, 1.0, 0.5}, 200, 1e-12, true);
        REQUIRE(res.objective_trace.size() == res.lambda_trace.size());
        for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
            if (res.lambda_trace[i] == res.lambda_trace[i - 1])
                CHECK(res.objective_trace[i] <= res.objective_trace[i - 1] * (1 + 1e-10) + 1e-12);
    }
    const Matrix d = Matrix::Ones(3, 3);
    const MissingMatrix m = MissingMatrix::Constant(3, 3, false);
    CHECK_THROWS_AS(soft_impute(d, m, {}), ConfigError);
    CHECK_THROWS_AS(soft_impute(d, m, {1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(soft_impute(d, m, {-1.0}), ConfigError);
}

TEST_CASE("masked reconstruction loss gradients match finite differences") {
    std::mt19937_64 rng(24);
    AutoencoderConfig cfg;
    cfg.latent_dim = 2;
    cfg.encoder_hidden = {5};
    cfg.decoder_hidden = {4};
    for (int trial = 0; trial < 5; ++trial) {
        nn::Mlp net = make_autoencoder_network(4, cfg, rng);
        for (auto& l : net.layers()) l.bias = 0.2 * testing::normal_matrix(l.bias.size(), 1, rng);
        const Matrix in = testing::uniform_matrix(6, 4, rng);
        const Matrix target = testing::uniform_matrix(6, 4, rng);
        const MissingMatrix miss = testing::random_mask(6, 4, 0.3, rng);
        const auto ev = masked_squared_loss(net, in, target, miss);
        auto loss = [&] { return masked_squared_loss(net, in, target, miss).value; };
        CHECK(testing::mlp_gradient_error(net, ev.grads, loss) < 1e-4);
    }
}

TEST_CASE("masked loss ignores masked cells") {
    std::mt19937_64 rng(25);
    AutoencoderConfig cfg;
    cfg.latent_dim = 2;
    cfg.encoder_hidden = {3};
    cfg.decoder_hidden = {3};
    const nn::Mlp net = make_autoencoder_network(3, cfg, rng);
    const Matrix in = testing::uniform_matrix(4, 3, rng);
    Matrix target = testing::uniform_matrix(4, 3, rng);
    MissingMatrix miss = MissingMatrix::Constant(4, 3, false);
    miss(1, 2) = true;
    const double before = masked_squared_loss(net, in, target, miss).value;
    target(1, 2) += 100.0;
    CHECK(masked_squared_loss(net, in, target, miss).value == before);
}

TEST_CASE("autoencoder targets") {
    std::mt19937_64 rng(26);
    const Matrix clean = testing::uniform_matrix(5, 3, rng);
    CHECK(autoencoder_targets(AutoencoderVariant::Rae, clean, clean).isZero(0.0));
    const Matrix noisy = clean.array() + 0.1;
    CHECK(autoencoder_targets(AutoencoderVariant::Dae, clean, noisy) == clean);
    CHECK((autoencoder_targets(AutoencoderVariant::Rae, clean, noisy).array() + 0.1).abs().maxCoeff() < 1e-15);
}

TEST_CASE("a small autoencoder can overfit a tiny dataset") {
    std::mt19937_64 rng(27);
    const Matrix data = testing::uniform_matrix(10, 4, rng);
    AutoencoderConfig cfg;
    cfg.latent_dim = 4;
    cfg.encoder_hidden = {16};
    cfg.decoder_hidden = {16};
    cfg.epochs = 2000;
    cfg.batch_size = 10;
    cfg.learning_rate = 1e-2;
    Autoencoder ae(AutoencoderVariant::Ae, cfg);
    const auto losses = ae.fit(data, MissingMatrix::Constant(10, 4, false));
    CHECK(losses.size() == 2000u);
    CHECK(losses.back() < 1e-3);
    CHECK(losses.back() < losses.front());
    CHECK_THROWS_AS(Autoencoder(AutoencoderVariant::Ae, AutoencoderConfig{.latent_dim = 0}), ConfigError);
    CHECK_THROWS_AS(Autoencoder(AutoencoderVariant::Ae, cfg).transform(data, MissingMatrix::Constant(10, 4, true)),
                    ConfigError);
}
