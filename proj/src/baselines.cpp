#include "fpimpute/baselines.hpp"

#include "fpimpute/autoencoder.hpp"
#include "fpimpute/generative_imputer.hpp"
#include "fpimpute/imputer.hpp"
#include "fpimpute/matrix_completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace fpimpute {

// ---------------------------------------------------------------- constant

Matrix constant_impute(const Matrix& data, const MissingMatrix& missing, ConstantStatistic statistic,
                       const FillStatistics& train_stats) {
    switch (statistic) {
        case ConstantStatistic::Mean: return apply_mask(data, missing, InitPolicy::Mean, train_stats);
        case ConstantStatistic::Median: return apply_mask(data, missing, InitPolicy::Median, train_stats);
        case ConstantStatistic::Zero: return apply_mask(data, missing, InitPolicy::Zero, train_stats);
    }
    return data;
}

Matrix constant_impute(const Matrix& data, const MissingMatrix& missing, ConstantStatistic statistic) {
    return constant_impute(data, missing, statistic, FillStatistics::from_observed(data, missing));
}

// ---------------------------------------------------------------- knn

double partial_distance(const Eigen::Ref<const Vector>& a, const MissingRow& a_missing,
                        const Eigen::Ref<const Vector>& b, const MissingRow& b_missing) {
    double sum = 0.0;
    int shared = 0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
        if (a_missing(j) || b_missing(j)) continue;
        const double d = a(j) - b(j);
        sum += d * d;
        ++shared;
    }
    if (shared == 0) return std::numeric_limits<double>::infinity();
    return std::sqrt(sum / shared);
}

Vector knn_impute(const Matrix& train, const MissingMatrix& train_missing, const Vector& row,
                  const MissingRow& row_missing, int k, KnnStats* stats) {
    require_shape(train.cols() == row.size() && row_missing.size() == row.size() &&
                      train_missing.rows() == train.rows() && train_missing.cols() == train.cols(),
                  "knn inputs disagree in shape");
    if (k < 1) throw ConfigError("knn needs k >= 1");
    Vector out = row;
    if (!row_missing.any()) return out;

    std::vector<std::pair<double, Eigen::Index>> ranked;
    ranked.reserve(static_cast<std::size_t>(train.rows()));
    for (Eigen::Index r = 0; r < train.rows(); ++r) {
        const MissingRow rm = train_missing.row(r).transpose();
        const double d = partial_distance(row, row_missing, train.row(r).transpose(), rm);
        if (std::isfinite(d)) ranked.emplace_back(d, r);
    }
    std::sort(ranked.begin(), ranked.end());

    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (!row_missing(j)) continue;
        double sum = 0.0;
        int used = 0;
        for (const auto& [d, r] : ranked) {
            if (train_missing(r, j)) continue;
            sum += train(r, j);
            if (++used == k) break;
        }
        if (used > 0) {
            out(j) = sum / used;
            continue;
        }
        double fsum = 0.0;
        int fcnt = 0;
        for (Eigen::Index r = 0; r < train.rows(); ++r)
            if (!train_missing(r, j)) {
                fsum += train(r, j);
                ++fcnt;
            }
        if (fcnt == 0) throw DataError("knn: feature " + std::to_string(j) + " is never observed in training data");
        out(j) = fsum / fcnt;
        if (stats) ++stats->fallbacks;
    }
    return out;
}

// ---------------------------------------------------------------- mice

namespace {

Vector predict_feature(const Matrix& x, Eigen::Index row, Eigen::Index feature, const Vector& coef) {
    double y = coef(0);
    Eigen::Index c = 1;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j == feature) continue;
        y += coef(c++) * x(row, j);
    }
    return Vector::Constant(1, y);
}

}  // namespace

MiceResult mice_linear(const Matrix& data, const MissingMatrix& missing, int n_rounds, double ridge) {
    require_shape(data.rows() == missing.rows() && data.cols() == missing.cols(), "mask shape does not match data");
    if (n_rounds < 1) throw ConfigError("mice needs at least one round");
    if (ridge < 0.0) throw ConfigError("mice ridge must be non-negative");
    const Eigen::Index n = data.rows();
    const Eigen::Index k = data.cols();

    MiceResult res;
    res.imputed = apply_mask(data, missing, InitPolicy::Mean);
    res.coefficients.assign(static_cast<std::size_t>(k), Vector());
    const Eigen::Index p = k - 1;

    for (int round = 0; round < n_rounds; ++round) {
        for (Eigen::Index j = 0; j < k; ++j) {
            if (!missing.col(j).any()) continue;
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < n; ++i)
                if (!missing(i, j)) rows.push_back(i);
            const auto m = static_cast<Eigen::Index>(rows.size());

            Matrix design(m, p);
            Vector target(m);
            for (Eigen::Index r = 0; r < m; ++r) {
                Eigen::Index c = 0;
                for (Eigen::Index q = 0; q < k; ++q)
                    if (q != j) design(r, c++) = res.imputed(rows[static_cast<std::size_t>(r)], q);
                target(r) = res.imputed(rows[static_cast<std::size_t>(r)], j);
            }
            const Vector x_mean = p > 0 ? Vector(design.colwise().mean().transpose()) : Vector();
            const double y_mean = target.mean();
            Vector beta = Vector::Zero(p);
            if (p > 0) {
                const Matrix centred = design.rowwise() - x_mean.transpose();
                Matrix gram = centred.transpose() * centred;
                gram.diagonal().array() += ridge;
                const Vector rhs = centred.transpose() * (target.array() - y_mean).matrix();
                if (ridge == 0.0) {
                    Eigen::FullPivLU<Matrix> lu(gram);
                    if (lu.rank() < p)
                        throw NumericError("mice: singular normal equations for feature " + std::to_string(j) +
                                           "; use ridge > 0");
                    beta = lu.solve(rhs);
                } else {
                    Eigen::LDLT<Matrix> ldlt(gram);
                    if (ldlt.info() != Eigen::Success)
                        throw NumericError("mice: normal equations failed for feature " + std::to_string(j));
                    beta = ldlt.solve(rhs);
                }
                if (!beta.allFinite()) throw NumericError("mice: non-finite coefficients for feature " + std::to_string(j));
            }
            Vector coef(p + 1);
            coef(0) = y_mean - (p > 0 ? x_mean.dot(beta) : 0.0);
            coef.tail(p) = beta;
            res.coefficients[static_cast<std::size_t>(j)] = coef;
            for (Eigen::Index i = 0; i < n; ++i)
                if (missing(i, j)) res.imputed(i, j) = predict_feature(res.imputed, i, j, coef)(0);
        }
    }
    return res;
}

// ---------------------------------------------------------------- Imputer

void Imputer::fit(const Matrix& data, const MissingMatrix& missing) { do_fit(hide_missing(data, missing), missing); }

Matrix Imputer::transform(const Matrix& data, const MissingMatrix& missing) const {
    const Matrix hidden = hide_missing(data, missing);
    Matrix out = do_transform(hidden, missing);
    // Observed cells always come straight from the input.
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            if (!missing(i, j)) out(i, j) = data(i, j);
    return out;
}

Matrix Imputer::fit_transform(const Matrix& data, const MissingMatrix& missing) {
    Matrix out = do_fit_transform(hide_missing(data, missing), missing);
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            if (!missing(i, j)) out(i, j) = data(i, j);
    return out;
}

Matrix Imputer::do_fit_transform(const Matrix& hidden, const MissingMatrix& missing) {
    do_fit(hidden, missing);
    return do_transform(hidden, missing);
}

namespace {

std::vector<int> int_list(const Config& c, const std::string& key, std::vector<int> fallback) {
    if (!c.contains(key)) return fallback;
    std::vector<int> out;
    for (double d : c.get_double_list(key)) out.push_back(static_cast<int>(d));
    return out;
}

class ConstantImputer final : public Imputer {
public:
    ConstantImputer(std::string name, ConstantStatistic stat) : name_(std::move(name)), stat_(stat) {}
    std::string name() const override { return name_; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override {
        stats_ = FillStatistics::from_observed(hidden, missing);
    }
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        return constant_impute(hidden, missing, stat_, stats_);
    }

private:
    std::string name_;
    ConstantStatistic stat_;
    FillStatistics stats_;
};

class KnnImputer final : public Imputer {
public:
    explicit KnnImputer(int k) : k_(k) {
        if (k < 1) throw ConfigError("knn needs k >= 1");
    }
    std::string name() const override { return "knn"; }
    std::size_t fallback_count() const override { return stats_.fallbacks; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override {
        train_ = hidden;
        train_missing_ = missing;
    }
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        Matrix out = hidden;
        for (Eigen::Index i = 0; i < hidden.rows(); ++i) {
            const MissingRow rm = missing.row(i).transpose();
            if (!rm.any()) continue;
            out.row(i) = knn_impute(train_, train_missing_, hidden.row(i).transpose(), rm, k_, &stats_).transpose();
        }
        return out;
    }

private:
    int k_;
    Matrix train_;
    MissingMatrix train_missing_;
    mutable KnnStats stats_;
};

class PcaImputer final : public Imputer {
public:
    PcaImputer(int rank, int max_iters, double tol) : rank_(rank), max_iters_(max_iters), tol_(tol) {}
    std::string name() const override { return "pca"; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override { fitted_ = run(hidden, missing); }
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        return pca_project_impute(hidden, missing, fitted_.mean, fitted_.components, max_iters_, tol_);
    }
    Matrix do_fit_transform(const Matrix& hidden, const MissingMatrix& missing) override {
        fitted_ = run(hidden, missing);
        return fitted_.imputed;
    }

private:
    PcaResult run(const Matrix& hidden, const MissingMatrix& missing) const {
        const int rank = rank_ > 0 ? rank_ : rank_for_variance(hidden, missing, 0.9);
        return pca_impute(hidden, missing, rank, max_iters_, tol_);
    }

    int rank_;
    int max_iters_;
    double tol_;
    PcaResult fitted_;
};

class SoftImputeImputer final : public Imputer {
public:
    SoftImputeImputer(std::vector<double> lambdas, int steps, double start_ratio, double end_ratio, int max_iters,
                      double tol)
        : lambdas_(std::move(lambdas)), steps_(steps), start_(start_ratio), end_(end_ratio), max_iters_(max_iters),
          tol_(tol) {}
    std::string name() const override { return "softimpute"; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override {
        train_ = hidden;
        train_missing_ = missing;
    }
    // Transductive: new rows are completed jointly with the training rows.
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        Matrix stacked(train_.rows() + hidden.rows(), hidden.cols());
        stacked << train_, hidden;
        MissingMatrix stacked_missing(stacked.rows(), stacked.cols());
        stacked_missing << train_missing_, missing;
        return run(stacked, stacked_missing).bottomRows(hidden.rows());
    }
    Matrix do_fit_transform(const Matrix& hidden, const MissingMatrix& missing) override {
        do_fit(hidden, missing);
        return run(hidden, missing);
    }

private:
    Matrix run(const Matrix& x, const MissingMatrix& m) const {
        const auto lambdas = lambdas_.empty() ? default_lambda_schedule(x, m, steps_, start_, end_) : lambdas_;
        return soft_impute(x, m, lambdas, max_iters_, tol_).imputed;
    }

    std::vector<double> lambdas_;
    int steps_;
    double start_, end_;
    int max_iters_;
    double tol_;
    Matrix train_;
    MissingMatrix train_missing_;
};

class MiceImputer final : public Imputer {
public:
    MiceImputer(int rounds, double ridge) : rounds_(rounds), ridge_(ridge) {}
    std::string name() const override { return "mice"; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override { run(hidden, missing); }
    Matrix do_fit_transform(const Matrix& hidden, const MissingMatrix& missing) override {
        return run(hidden, missing);
    }
    // New rows reuse the coefficients of the final training round.
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        Matrix x = apply_mask(hidden, missing, InitPolicy::Mean, stats_);
        for (int round = 0; round < rounds_; ++round) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                if (!missing.col(j).any()) continue;
                const auto& coef = coefficients_[static_cast<std::size_t>(j)];
                if (coef.size() == 0) continue;  // feature never missing in training: keep mean fill
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    if (!missing(i, j)) continue;
                    double y = coef(0);
                    Eigen::Index c = 1;
                    for (Eigen::Index q = 0; q < x.cols(); ++q)
                        if (q != j) y += coef(c++) * x(i, q);
                    x(i, j) = y;
                }
            }
        }
        return x;
    }

private:
    Matrix run(const Matrix& hidden, const MissingMatrix& missing) {
        stats_ = FillStatistics::from_observed(hidden, missing);
        auto res = mice_linear(hidden, missing, rounds_, ridge_);
        coefficients_ = std::move(res.coefficients);
        // Features complete in training still need a model for new rows.
        const Eigen::Index k = hidden.cols();
        for (Eigen::Index j = 0; j < k; ++j) {
            auto& coef = coefficients_[static_cast<std::size_t>(j)];
            if (coef.size() != 0) continue;
            // Regress on the imputed matrix with feature j fully observed.
            Matrix design(hidden.rows(), k - 1);
            for (Eigen::Index i = 0; i < hidden.rows(); ++i) {
                Eigen::Index c = 0;
                for (Eigen::Index q = 0; q < k; ++q)
                    if (q != j) design(i, c++) = res.imputed(i, q);
            }
            const Vector y = res.imputed.col(j);
            coef = Vector::Zero(k);
            if (k > 1) {
                const Vector xm = design.colwise().mean().transpose();
                const Matrix centred = design.rowwise() - xm.transpose();
                Matrix gram = centred.transpose() * centred;
                gram.diagonal().array() += std::max(ridge_, 1e-12);
                const Vector beta = gram.ldlt().solve(centred.transpose() * (y.array() - y.mean()).matrix());
                coef(0) = y.mean() - xm.dot(beta);
                coef.tail(k - 1) = beta;
            } else {
                coef(0) = y.mean();
            }
        }
        return res.imputed;
    }

    int rounds_;
    double ridge_;
    FillStatistics stats_;
    std::vector<Vector> coefficients_;
};

class AutoencoderImputer final : public Imputer {
public:
    AutoencoderImputer(AutoencoderVariant variant, AutoencoderConfig cfg) : model_(variant, cfg), variant_(variant) {}
    std::string name() const override { return to_string(variant_); }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override {
        stats_ = FillStatistics::from_observed(hidden, missing);
        model_.fit(apply_mask(hidden, missing, InitPolicy::Mean, stats_), missing);
    }
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        return model_.transform(apply_mask(hidden, missing, InitPolicy::Mean, stats_), missing);
    }

private:
    Autoencoder model_;
    AutoencoderVariant variant_;
    FillStatistics stats_;
};

class GenerativeMethod final : public Imputer {
public:
    GenerativeMethod(std::vector<OutputHead> heads, ModelShape shape, FitConfig fit, InferenceOptions inference,
                     std::uint64_t seed)
        : heads_(std::move(heads)), shape_(std::move(shape)), fit_(fit), inference_(inference), seed_(seed) {}
    GenerativeMethod(GenerativeImputer model, FillStatistics stats, FitConfig fit, InferenceOptions inference,
                     std::uint64_t seed)
        : heads_(model.heads()), shape_(model.shape()), fit_(fit), inference_(inference), seed_(seed),
          stats_(std::move(stats)), model_(std::move(model)) {}
    std::string name() const override { return "generative"; }

    const GenerativeImputer* generative_model() const override { return model_ ? &*model_ : nullptr; }
    const FillStatistics* fill_statistics() const override { return &stats_; }

protected:
    void do_fit(const Matrix& hidden, const MissingMatrix& missing) override { (void)run(hidden, missing); }
    Matrix do_fit_transform(const Matrix& hidden, const MissingMatrix& missing) override {
        return run(hidden, missing).imputed;
    }
    Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const override {
        if (!model_) throw ConfigError("generative imputer used before fit");
        const Matrix filled =
            apply_mask(hidden, missing, fit_.init_policy, stats_, derive_seed(seed_, 11 + hidden.rows()));
        return model_->transform(filled, missing, inference_);
    }

private:
    FitResult run(const Matrix& hidden, const MissingMatrix& missing) {
        auto heads = heads_;
        if (heads.empty()) heads.assign(static_cast<std::size_t>(hidden.cols()), OutputHead::Gaussian);
        require_shape(static_cast<Eigen::Index>(heads.size()) == hidden.cols(), "schema does not match data width");
        stats_ = FillStatistics::from_observed(hidden, missing);
        const Matrix filled = apply_mask(hidden, missing, fit_.init_policy, stats_, derive_seed(seed_, 10));
        model_.emplace(heads, shape_, derive_seed(seed_, 1));
        FitConfig cfg = fit_;
        cfg.seed = derive_seed(seed_, 2);
        return model_->fit(filled, missing, cfg);
    }

    std::vector<OutputHead> heads_;
    ModelShape shape_;
    FitConfig fit_;
    InferenceOptions inference_;
    std::uint64_t seed_;
    FillStatistics stats_;
    std::optional<GenerativeImputer> model_;
};

AutoencoderConfig autoencoder_config(const Config& c, std::uint64_t seed) {
    AutoencoderConfig a;
    a.latent_dim = static_cast<int>(c.get_int("latent_dim", a.latent_dim));
    a.encoder_hidden = int_list(c, "encoder_hidden", a.encoder_hidden);
    a.decoder_hidden = int_list(c, "decoder_hidden", a.decoder_hidden);
    a.epochs = static_cast<int>(c.get_int("epochs", a.epochs));
    a.batch_size = static_cast<int>(c.get_int("batch_size", a.batch_size));
    a.learning_rate = c.get_double("learning_rate", a.learning_rate);
    a.noise_std = c.get_double("noise_std", a.noise_std);
    a.seed = seed;
    return a;
}

}  // namespace

const std::vector<std::string>& imputer_names() {
    static const std::vector<std::string> names{"generative", "mice", "mean", "zero", "median", "ae",
                                                "dae",        "rae",  "knn",  "pca",  "softimpute"};
    return names;
}

bool is_registered_imputer(const std::string& name) {
    const auto& n = imputer_names();
    return std::find(n.begin(), n.end(), name) != n.end();
}

ModelShape model_shape_from(const Config& g) {
    ModelShape shape;
    shape.latent_dim = static_cast<int>(g.get_int("latent_dim", shape.latent_dim));
    shape.encoder_hidden = int_list(g, "encoder_hidden", shape.encoder_hidden);
    shape.decoder_hidden = int_list(g, "decoder_hidden", shape.decoder_hidden);
    shape.sample_noise_std = g.get_double("sample_noise_std", shape.sample_noise_std);
    shape.mc_samples = static_cast<int>(g.get_int("mc_samples", shape.mc_samples));
    shape.analytic_kl = g.get_bool("analytic_kl", shape.analytic_kl);
    return shape;
}

FitConfig fit_config_from(const Config& g) {
    FitConfig fit;
    fit.epochs = static_cast<int>(g.get_int("epochs", fit.epochs));
    fit.batch_size = static_cast<int>(g.get_int("batch_size", fit.batch_size));
    fit.learning_rate = g.get_double("learning_rate", fit.learning_rate);
    fit.inference_count = static_cast<int>(g.get_int("inference_count", fit.inference_count));
    fit.training_interval = static_cast<int>(g.get_int("training_interval", fit.training_interval));
    fit.init_policy = parse_init_policy(g.get_string("init_policy", to_string(fit.init_policy)));
    fit.validate();
    return fit;
}

InferenceOptions inference_options_from(const Config& g, const FitConfig& fit) {
    InferenceOptions inf;
    inf.iterations = static_cast<int>(g.get_int("transform_iterations", fit.inference_count));
    inf.until_converged = g.get_bool("converge", false);
    inf.tolerance = g.get_double("converge_tolerance", inf.tolerance);
    inf.max_iterations = static_cast<int>(g.get_int("converge_max_iterations", inf.max_iterations));
    return inf;
}

std::unique_ptr<Imputer> make_imputer(const std::string& name, const Config& config, std::uint64_t seed,
                                      const std::vector<FeatureSchema>& schema) {
    const Config b = config.subtree("baselines." + name);
    if (name == "mean") return std::make_unique<ConstantImputer>(name, ConstantStatistic::Mean);
    if (name == "median") return std::make_unique<ConstantImputer>(name, ConstantStatistic::Median);
    if (name == "zero") return std::make_unique<ConstantImputer>(name, ConstantStatistic::Zero);
    if (name == "knn") return std::make_unique<KnnImputer>(static_cast<int>(b.get_int("k", 1)));
    if (name == "pca")
        return std::make_unique<PcaImputer>(static_cast<int>(b.get_int("rank", 0)),
                                            static_cast<int>(b.get_int("max_iters", 1000)), b.get_double("tol", 1e-8));
    if (name == "softimpute")
        return std::make_unique<SoftImputeImputer>(b.get_double_list("lambdas"), static_cast<int>(b.get_int("steps", 10)),
                                                   b.get_double("start_ratio", 0.5), b.get_double("end_ratio", 0.01),
                                                   static_cast<int>(b.get_int("max_iters", 200)),
                                                   b.get_double("tol", 1e-6));
    if (name == "mice")
        return std::make_unique<MiceImputer>(static_cast<int>(b.get_int("rounds", 10)), b.get_double("ridge", 1e-3));
    if (name == "ae") return std::make_unique<AutoencoderImputer>(AutoencoderVariant::Ae, autoencoder_config(b, seed));
    if (name == "dae") return std::make_unique<AutoencoderImputer>(AutoencoderVariant::Dae, autoencoder_config(b, seed));
    if (name == "rae") return std::make_unique<AutoencoderImputer>(AutoencoderVariant::Rae, autoencoder_config(b, seed));
    if (name == "generative") {
        const Config g = config.subtree("generative");
        const auto fit = fit_config_from(g);
        return std::make_unique<GenerativeMethod>(schema.empty() ? std::vector<OutputHead>{} : heads_for(schema),
                                                  model_shape_from(g), fit, inference_options_from(g, fit), seed);
    }
    throw ConfigError("unknown imputation method '" + name + "'");
}

std::unique_ptr<Imputer> restore_generative_imputer(GenerativeImputer model, FillStatistics stats,
                                                    const Config& config, std::uint64_t seed) {
    const Config g = config.subtree("generative");
    const auto fit = fit_config_from(g);
    return std::make_unique<GenerativeMethod>(std::move(model), std::move(stats), fit, inference_options_from(g, fit),
                                              seed);
}

}  // namespace fpimpute
