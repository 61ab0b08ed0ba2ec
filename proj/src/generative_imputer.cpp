#include "fpimpute/generative_imputer.hpp"

#include "fpimpute/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace fpimpute {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // ln(2*pi)

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::vector<int> chain(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    return m;
}

void negate(nn::MlpGradients& g) { g *= -1.0; }

}  // namespace

double logistic(double x) {
    constexpr double lo = std::numeric_limits<double>::epsilon();
    const double p = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::clamp(p, lo, 1.0 - lo);
}

double log_standard_normal(const Vector& z) {
    return -0.5 * static_cast<double>(z.size()) * kLog2Pi - 0.5 * z.squaredNorm();
}

std::vector<OutputHead> heads_for(const std::vector<FeatureSchema>& schema) {
    std::vector<OutputHead> heads;
    heads.reserve(schema.size());
    for (const auto& f : schema) heads.push_back(f.kind == FeatureKind::Binary ? OutputHead::Bernoulli : OutputHead::Gaussian);
    return heads;
}

void FitConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (inference_count < 1) throw ConfigError("inference_count must be at least 1");
    if (training_interval < 1) throw ConfigError("training_interval must be at least 1");
}

GenerativeImputer::GenerativeImputer(std::vector<OutputHead> heads, ModelShape shape, std::uint64_t seed)
    : heads_(std::move(heads)), shape_(std::move(shape)) {
    const int k = static_cast<int>(heads_.size());
    if (k < 1) throw ConfigError("the imputer needs at least one feature");
    if (shape_.latent_dim < 1) throw ConfigError("latent dimension must be positive");
    if (shape_.mc_samples < 1) throw ConfigError("mc_samples must be at least 1");
    if (!(shape_.sample_noise_std >= 0.0)) throw ConfigError("sample_noise_std must be non-negative");
    std::mt19937_64 rng(seed);
    h_ = nn::Mlp::glorot(chain(k, shape_.encoder_hidden, shape_.latent_dim), rng);
    l_ = nn::Mlp::glorot(chain(k, shape_.encoder_hidden, shape_.latent_dim), rng);
    f_ = nn::Mlp::glorot(chain(shape_.latent_dim, shape_.decoder_hidden, k), rng);
    g_ = nn::Mlp::glorot(chain(shape_.latent_dim, shape_.decoder_hidden, k), rng);
    adam_ = {nn::AdamState::for_network(h_), nn::AdamState::for_network(l_), nn::AdamState::for_network(f_),
             nn::AdamState::for_network(g_)};
}

void GenerativeImputer::check_rows(const Matrix& rows) const {
    if (rows.cols() != feature_count())
        throw ShapeError("rows have " + std::to_string(rows.cols()) + " features, model expects " +
                         std::to_string(feature_count()));
}

LatentGaussian GenerativeImputer::encode(const Vector& row_filled) const {
    if (row_filled.size() != feature_count()) throw ShapeError("row length does not match the model");
    LatentGaussian q{nn::forward(h_, row_filled), nn::forward(l_, row_filled).array().exp().matrix()};
    if (!q.mean.allFinite() || !q.var.allFinite()) throw NumericError("encoder produced a non-finite output");
    return q;
}

FeatureGaussian GenerativeImputer::decode(const Vector& z) const {
    if (z.size() != latent_dim()) throw ShapeError("latent vector length does not match the model");
    FeatureGaussian p{nn::forward(f_, z), nn::forward(g_, z).array().exp().matrix()};
    if (!p.mean.allFinite() || !p.var.allFinite()) throw NumericError("decoder produced a non-finite output");
    return p;
}

Vector GenerativeImputer::expected_values(const Vector& decoded_mean) const {
    Vector out = decoded_mean;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (heads_[static_cast<std::size_t>(i)] == OutputHead::Bernoulli) out(i) = logistic(out(i));
    return out;
}

Vector GenerativeImputer::fixed_point_impute(const Vector& row, const Eigen::Array<bool, Eigen::Dynamic, 1>& missing_row,
                                             int n_iters) const {
    if (row.size() != feature_count() || missing_row.size() != feature_count())
        throw ShapeError("row or mask length does not match the model");
    if (n_iters < 1) throw ConfigError("fixed-point imputation needs at least one iteration");
    Vector current = row;
    for (int it = 0; it < n_iters; ++it) {
        const Vector z = nn::forward(h_, current);
        const Vector y = expected_values(nn::forward(f_, z));
        if (!y.allFinite()) throw NumericError("decoder produced a non-finite imputation");
        for (Eigen::Index j = 0; j < current.size(); ++j)
            if (missing_row(j)) current(j) = y(j);
    }
    return current;
}

Matrix GenerativeImputer::impute_rows(const Matrix& rows, const MissingMatrix& missing, int n_iters) const {
    InferenceOptions opts;
    opts.iterations = n_iters;
    return transform_with_trace(rows, missing, opts).imputed;
}

Matrix GenerativeImputer::transform(const Matrix& rows, const MissingMatrix& missing,
                                    const InferenceOptions& options) const {
    return transform_with_trace(rows, missing, options).imputed;
}

InferenceTrace GenerativeImputer::transform_with_trace(const Matrix& rows, const MissingMatrix& missing,
                                                       const InferenceOptions& options) const {
    check_rows(rows);
    require_shape(missing.rows() == rows.rows() && missing.cols() == rows.cols(), "mask shape does not match rows");
    const int cap = options.until_converged ? options.max_iterations : options.iterations;
    if (cap < 1) throw ConfigError("fixed-point imputation needs at least one iteration");

    const Eigen::Index n = rows.rows();
    const Eigen::Index k = rows.cols();
    InferenceTrace trace;
    trace.iterations_used.assign(static_cast<std::size_t>(n), 0);

    // Rows without missing cells are never touched.
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < n; ++i)
        if (missing.row(i).any()) active.push_back(i);

    Matrix current = rows.transpose();  // K x n, one column per row
    for (int it = 0; it < cap && !active.empty(); ++it) {
        Matrix batch(k, static_cast<Eigen::Index>(active.size()));
        for (std::size_t c = 0; c < active.size(); ++c) batch.col(static_cast<Eigen::Index>(c)) = current.col(active[c]);
        const Matrix z = nn::forward_batch(h_, batch);
        Matrix y = nn::forward_batch(f_, z);
        for (Eigen::Index j = 0; j < k; ++j)
            if (heads_[static_cast<std::size_t>(j)] == OutputHead::Bernoulli)
                for (Eigen::Index c = 0; c < y.cols(); ++c) y(j, c) = logistic(y(j, c));
        if (!y.allFinite()) throw NumericError("decoder produced a non-finite imputation");

        Vector change = Vector::Zero(n);
        std::vector<Eigen::Index> still_active;
        for (std::size_t c = 0; c < active.size(); ++c) {
            const Eigen::Index i = active[c];
            double delta = 0.0;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (!missing(i, j)) continue;
                const double next = y(j, static_cast<Eigen::Index>(c));
                delta = std::max(delta, std::abs(next - current(j, i)));
                current(j, i) = next;
            }
            change(i) = delta;
            ++trace.iterations_used[static_cast<std::size_t>(i)];
            if (!options.until_converged || delta >= options.tolerance) still_active.push_back(i);
        }
        trace.max_change.push_back(std::move(change));
        active = std::move(still_active);
    }
    trace.imputed = current.transpose();
    // Observed cells are copied from the input so they are bit-identical.
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (!missing(i, j)) trace.imputed(i, j) = rows(i, j);
    return trace;
}

ObjectiveEvaluation GenerativeImputer::evaluate_objective(const Matrix& batch_rows, const Matrix& noise,
                                                          bool with_gradients) const {
    check_rows(batch_rows);
    const Eigen::Index b = batch_rows.rows();
    const Eigen::Index k = batch_rows.cols();
    const Eigen::Index j_dim = latent_dim();
    require_shape(noise.rows() == j_dim && noise.cols() == b, "noise must be latent_dim x batch");
    if (b == 0) throw ShapeError("objective needs at least one row");

    const Matrix x = batch_rows.transpose();  // K x B
    const auto th = nn::forward_trace(h_, x);
    const auto tl = nn::forward_trace(l_, x);
    const Matrix& mu_z = th.output();
    const Matrix& lv_z = tl.output();
    const Matrix sd_z = (0.5 * lv_z.array()).exp().matrix();
    const Matrix eps = shape_.sample_noise_std * noise;
    const Matrix z = mu_z + eps.cwiseProduct(sd_z);

    const auto tf = nn::forward_trace(f_, z);
    const auto tg = nn::forward_trace(g_, z);
    const Matrix& mu_x = tf.output();
    const Matrix& lv_x = tg.output();

    ObjectiveEvaluation ev;
    ev.per_row.resize(b);
    Matrix d_mu_x = Matrix::Zero(k, b);
    Matrix d_lv_x = Matrix::Zero(k, b);
    for (Eigen::Index c = 0; c < b; ++c) {
        double rec = 0.0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const double xi = x(i, c);
            const double mu = mu_x(i, c);
            if (heads_[static_cast<std::size_t>(i)] == OutputHead::Bernoulli) {
                rec += xi * mu - softplus(mu);
                d_mu_x(i, c) = xi - logistic(mu);
            } else {
                const double lv = lv_x(i, c);
                const double inv_var = std::exp(-lv);
                const double r = xi - mu;
                rec += -0.5 * kLog2Pi - 0.5 * lv - 0.5 * r * r * inv_var;
                d_mu_x(i, c) = r * inv_var;
                d_lv_x(i, c) = -0.5 + 0.5 * r * r * inv_var;
            }
        }
        double latent = 0.0;
        if (shape_.analytic_kl) {
            for (Eigen::Index d = 0; d < j_dim; ++d) {
                const double m = mu_z(d, c);
                const double lv = lv_z(d, c);
                latent -= 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
            }
        } else {
            double log_q = -0.5 * static_cast<double>(j_dim) * kLog2Pi;
            for (Eigen::Index d = 0; d < j_dim; ++d) {
                const double diff = z(d, c) - mu_z(d, c);
                log_q += -0.5 * lv_z(d, c) - 0.5 * diff * diff * std::exp(-lv_z(d, c));
            }
            latent = log_standard_normal(z.col(c)) - log_q;
        }
        ev.per_row(c) = rec + latent;
        if (!std::isfinite(ev.per_row(c)))
            throw NumericError("objective is not finite at batch row " + std::to_string(c));
    }
    ev.value = ev.per_row.mean();
    if (!with_gradients) return ev;

    const double scale = 1.0 / static_cast<double>(b);
    d_mu_x *= scale;
    d_lv_x *= scale;
    auto bf = nn::backward(f_, tf, d_mu_x);
    auto bg = nn::backward(g_, tg, d_lv_x);
    Matrix d_z = bf.input_grad + bg.input_grad;
    Matrix d_mu_z, d_lv_z;
    if (shape_.analytic_kl) {
        // -KL contributes -mu to d/dmu and (1 - var) / 2 to d/dlv.
        d_mu_z = d_z - scale * mu_z;
        d_lv_z = (d_z.cwiseProduct(eps).cwiseProduct(sd_z) * 0.5).array() +
                 0.5 * scale * (1.0 - lv_z.array().exp());
    } else {
        // log p(z) contributes -z; -log q(z) is +lv/2 + const along the sample path.
        d_z -= scale * z;
        d_mu_z = d_z;
        d_lv_z = (d_z.cwiseProduct(eps).cwiseProduct(sd_z) * 0.5).array() + 0.5 * scale;
    }
    auto bh = nn::backward(h_, th, d_mu_z);
    auto bl = nn::backward(l_, tl, d_lv_z);
    ev.grads = {std::move(bh.params), std::move(bl.params), std::move(bf.params), std::move(bg.params)};
    return ev;
}

double GenerativeImputer::objective(const Matrix& batch_rows, std::mt19937_64& rng) const {
    double total = 0.0;
    for (int s = 0; s < shape_.mc_samples; ++s)
        total += evaluate_objective(batch_rows, standard_normal(latent_dim(), batch_rows.rows(), rng), false).value;
    return total / shape_.mc_samples;
}

FitResult GenerativeImputer::fit(const Matrix& train_filled, const MissingMatrix& missing, const FitConfig& cfg) {
    cfg.validate();
    check_rows(train_filled);
    require_shape(missing.rows() == train_filled.rows() && missing.cols() == train_filled.cols(),
                  "mask shape does not match training data");
    if (!train_filled.allFinite()) throw DataError("training matrix must be filled before fitting");
    const Eigen::Index n = train_filled.rows();
    if (n == 0) throw DataError("cannot fit on an empty training set");

    for (auto& a : adam_) a.learning_rate = cfg.learning_rate;
    if (adam_[2].step_count == 0) {
        // A fresh decoder starts at the column means of the filled data, so E-steps
        // taken before it has learned anything leave the initial fills in place.
        auto& out = f_.layers().back();
        out.weight.setZero();
        const Vector means = train_filled.colwise().mean().transpose();
        for (Eigen::Index j = 0; j < means.size(); ++j) {
            if (heads_[static_cast<std::size_t>(j)] == OutputHead::Bernoulli) {
                const double p = std::clamp(means(j), 1e-3, 1.0 - 1e-3);
                out.bias(j) = std::log(p / (1.0 - p));
            } else {
                out.bias(j) = means(j);
            }
        }
    }
    std::array<nn::Mlp*, 4> nets{&h_, &l_, &f_, &g_};

    std::mt19937_64 rng(cfg.seed);
    FitResult result;
    result.imputed = train_filled;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n);
    std::size_t last_e_step_at = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min(bs, n - start);
            Matrix batch(len, train_filled.cols());
            for (Eigen::Index r = 0; r < len; ++r)
                batch.row(r) = result.imputed.row(order[static_cast<std::size_t>(start + r)]);

            // M-step: one ascent step on the objective with the fills held fixed.
            ObjectiveEvaluation total;
            for (int s = 0; s < shape_.mc_samples; ++s) {
                ObjectiveEvaluation ev;
                try {
                    ev = evaluate_objective(batch, standard_normal(latent_dim(), len, rng));
                } catch (const NumericError& e) {
                    throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(result.m_steps) + ": " + e.what());
                }
                if (s == 0) {
                    total = std::move(ev);
                } else {
                    total.value += ev.value;
                    total.grads.encoder_mean += ev.grads.encoder_mean;
                    total.grads.encoder_logvar += ev.grads.encoder_logvar;
                    total.grads.decoder_mean += ev.grads.decoder_mean;
                    total.grads.decoder_logvar += ev.grads.decoder_logvar;
                }
            }
            const double inv_s = 1.0 / shape_.mc_samples;
            std::array<nn::MlpGradients*, 4> grads{&total.grads.encoder_mean, &total.grads.encoder_logvar,
                                                   &total.grads.decoder_mean, &total.grads.decoder_logvar};
            for (std::size_t q = 0; q < 4; ++q) {
                *grads[q] *= inv_s;
                negate(*grads[q]);
                try {
                    nn::adam_step(*nets[q], *grads[q], adam_[q]);
                } catch (const NumericError& e) {
                    throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(result.m_steps) + ": " + e.what());
                }
            }
            epoch_sum += total.value * inv_s * static_cast<double>(len);
            ++result.m_steps;

            // E-step: refresh every stored fill with the weights held fixed.
            if (result.m_steps % static_cast<std::size_t>(cfg.training_interval) == 0) {
                result.imputed = impute_rows(train_filled, missing, cfg.inference_count);
                ++result.e_steps;
                last_e_step_at = result.m_steps;
            }
        }
        result.epoch_objectives.push_back(epoch_sum / static_cast<double>(n));
    }
    if (last_e_step_at != result.m_steps || result.m_steps == 0) {
        result.imputed = impute_rows(train_filled, missing, cfg.inference_count);
        ++result.e_steps;
    }
    return result;
}

namespace {
constexpr std::array<char, 8> kModelMagic = {'F', 'P', 'G', 'E', 'N', '\0', '\0', '\0'};
constexpr std::uint32_t kModelVersion = 1;
}  // namespace

void GenerativeImputer::write(std::ostream& out) const {
    out.write(kModelMagic.data(), kModelMagic.size());
    nn::io::write_u32(out, kModelVersion);
    nn::io::write_u32(out, static_cast<std::uint32_t>(heads_.size()));
    for (auto hd : heads_) nn::io::write_u32(out, hd == OutputHead::Bernoulli ? 1 : 0);
    nn::io::write_u32(out, static_cast<std::uint32_t>(shape_.latent_dim));
    nn::io::write_u32(out, static_cast<std::uint32_t>(shape_.mc_samples));
    nn::io::write_f64(out, shape_.sample_noise_std);
    nn::io::write_u32(out, shape_.analytic_kl ? 1 : 0);
    for (const auto* hidden : {&shape_.encoder_hidden, &shape_.decoder_hidden}) {
        nn::io::write_u32(out, static_cast<std::uint32_t>(hidden->size()));
        for (int v : *hidden) nn::io::write_u32(out, static_cast<std::uint32_t>(v));
    }
    for (const auto* net : {&h_, &l_, &f_, &g_}) nn::write_mlp(out, *net);
}

GenerativeImputer GenerativeImputer::read(std::istream& in) {
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kModelMagic) throw DataError("not a generative imputer checkpoint (bad magic)");
    if (nn::io::read_u32(in) != kModelVersion) throw DataError("unsupported generative imputer checkpoint version");
    GenerativeImputer m;
    const auto k = nn::io::read_u32(in);
    if (k == 0 || k > 100000) throw DataError("checkpoint has an invalid feature count");
    for (std::uint32_t i = 0; i < k; ++i)
        m.heads_.push_back(nn::io::read_u32(in) ? OutputHead::Bernoulli : OutputHead::Gaussian);
    m.shape_.latent_dim = static_cast<int>(nn::io::read_u32(in));
    m.shape_.mc_samples = static_cast<int>(nn::io::read_u32(in));
    m.shape_.sample_noise_std = nn::io::read_f64(in);
    m.shape_.analytic_kl = nn::io::read_u32(in) != 0;
    for (auto* hidden : {&m.shape_.encoder_hidden, &m.shape_.decoder_hidden}) {
        hidden->resize(nn::io::read_u32(in));
        for (int& v : *hidden) v = static_cast<int>(nn::io::read_u32(in));
    }
    m.h_ = nn::read_mlp(in);
    m.l_ = nn::read_mlp(in);
    m.f_ = nn::read_mlp(in);
    m.g_ = nn::read_mlp(in);
    const int ki = static_cast<int>(k);
    if (m.h_.input_size() != ki || m.l_.input_size() != ki || m.f_.output_size() != ki || m.g_.output_size() != ki ||
        m.h_.output_size() != m.shape_.latent_dim || m.l_.output_size() != m.shape_.latent_dim ||
        m.f_.input_size() != m.shape_.latent_dim || m.g_.input_size() != m.shape_.latent_dim)
        throw DataError("checkpoint networks are inconsistent with its manifest");
    m.adam_ = {nn::AdamState::for_network(m.h_), nn::AdamState::for_network(m.l_), nn::AdamState::for_network(m.f_),
               nn::AdamState::for_network(m.g_)};
    return m;
}

}  // namespace fpimpute
