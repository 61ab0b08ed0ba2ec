#include "fpimpute/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fpimpute::synthetic {

namespace {

Dataset wrap(Matrix values, const std::vector<FeatureKind>& kinds) {
    Dataset d;
    d.values = std::move(values);
    for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
        FeatureSchema f;
        f.name = "x" + std::to_string(j + 1);
        f.kind = kinds.empty() ? FeatureKind::Continuous : kinds[static_cast<std::size_t>(j)];
        if (f.kind == FeatureKind::Binary) f.labels = {"0", "1"};
        d.schema.push_back(std::move(f));
    }
    return d;
}

}  // namespace

Dataset linear_gaussian(Eigen::Index rows, std::uint64_t seed, int features) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int latent = 3;
    Matrix w(latent, features);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    Matrix z(rows, latent);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    Matrix x = z * w;
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += 0.1 * normal(rng);
    return wrap(std::move(x), {});
}

Dataset sinusoidal(Eigen::Index rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.02);
    Matrix x(rows, 10);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double t = uni(rng);
        const double s = uni(rng);
        x(i, 0) = t;
        x(i, 1) = std::sin(3.0 * t);
        x(i, 2) = s;
        x(i, 3) = std::exp(s);
        x(i, 4) = std::tanh(2.0 * (t + s));
        x(i, 5) = t * s;
        x(i, 6) = std::cos(2.0 * s) + 0.5 * t;
        x(i, 7) = std::pow(0.5 * (t - s), 3.0);
        x(i, 8) = std::sin(2.0 * t + s);
        x(i, 9) = std::exp(-t) * 0.5;
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += noise(rng);
    }
    return wrap(std::move(x), {});
}

Matrix rank1_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector u(rows), v(cols);
    for (Eigen::Index i = 0; i < rows; ++i) u(i) = normal(rng);
    for (Eigen::Index j = 0; j < cols; ++j) v(j) = normal(rng);
    return u * v.transpose();
}

Dataset rank1(Eigen::Index rows, std::uint64_t seed, int features) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    Vector u(rows), v(features);
    for (Eigen::Index i = 0; i < rows; ++i) u(i) = 0.1 + expo(rng);
    for (Eigen::Index j = 0; j < features; ++j) v(j) = uni(rng);
    return wrap(u * v.transpose(), {});
}

Dataset mixed(Eigen::Index rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.02);
    Matrix x(rows, 10);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double t = uni(rng);
        const double s = uni(rng);
        x(i, 0) = t + noise(rng);
        x(i, 1) = s + noise(rng);
        x(i, 2) = std::sin(3.0 * t) * 0.5 + s * s + noise(rng);
        x(i, 3) = std::exp(t + s) * 0.2 + noise(rng);
        x(i, 4) = std::tanh(3.0 * (t - s)) + noise(rng);
        x(i, 5) = std::cos(2.0 * s) + 0.5 * t + noise(rng);
        x(i, 6) = t > 0.0 ? 1.0 : 0.0;
        x(i, 7) = s + t * t > 0.3 ? 1.0 : 0.0;
        x(i, 8) = std::sin(3.0 * t) > s ? 1.0 : 0.0;
        x(i, 9) = t * s > 0.0 ? 1.0 : 0.0;
    }
    using K = FeatureKind;
    std::vector<FeatureKind> kinds(10, K::Continuous);
    for (int j = 6; j < 10; ++j) kinds[static_cast<std::size_t>(j)] = K::Binary;
    return wrap(std::move(x), kinds);
}

Dataset skewed(Eigen::Index rows, std::uint64_t seed, int features) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    Matrix x(rows, features);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = expo(rng);
    return wrap(std::move(x), {});
}

const std::vector<std::string>& names() {
    static const std::vector<std::string> n{"linear-gaussian", "sinusoidal", "rank1", "mixed", "skewed"};
    return n;
}

Dataset make(const std::string& name, Eigen::Index rows, std::uint64_t seed) {
    if (rows < 2) throw ConfigError("synthetic dataset needs at least 2 rows");
    if (name == "linear-gaussian") return linear_gaussian(rows, seed);
    if (name == "sinusoidal") return sinusoidal(rows, seed);
    if (name == "rank1") return rank1(rows, seed);
    if (name == "mixed") return mixed(rows, seed);
    if (name == "skewed") return skewed(rows, seed);
    throw ConfigError("unknown synthetic dataset '" + name + "'");
}

const std::vector<std::string>& suite() {
    static const std::vector<std::string> s{"linear-gaussian", "sinusoidal", "rank1", "mixed"};
    return s;
}

bool is_nonlinear(const std::string& name) { return name == "sinusoidal" || name == "mixed"; }

}  // namespace fpimpute::synthetic
