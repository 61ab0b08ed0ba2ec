#pragma once

#include "fpimpute/common.hpp"
#include "fpimpute/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <random>

namespace fpimpute::testing {

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = 0.0,
                             double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// MCAR mask with probability p per cell. Every column keeps at least one
// observed cell and, unless `allow_full_rows`, every row keeps one too.
inline MissingMatrix random_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng,
                                 bool allow_full_rows = true) {
    std::bernoulli_distribution b(p);
    MissingMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = b(rng);
    for (Eigen::Index j = 0; j < cols; ++j)
        if (m.col(j).all()) m(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(rows)), j) = false;
    if (!allow_full_rows)
        for (Eigen::Index i = 0; i < rows; ++i)
            if (m.row(i).all()) m(i, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(cols))) = false;
    return m;
}

inline bool observed_bit_exact(const Matrix& out, const Matrix& in, const MissingMatrix& missing) {
    for (Eigen::Index j = 0; j < in.cols(); ++j)
        for (Eigen::Index i = 0; i < in.rows(); ++i)
            if (!missing(i, j) && std::bit_cast<std::uint64_t>(out(i, j)) != std::bit_cast<std::uint64_t>(in(i, j)))
                return false;
    return true;
}

inline double tensor_rel_error(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& n) {
    const double scale = std::max(a.norm(), n.norm());
    if (scale < 1e-10) return 0.0;
    return (a - n).norm() / scale;
}

// Largest relative error between `analytic` and central differences of
// `loss` over every weight matrix and bias vector of `net`. The network is
// perturbed in place and restored.
inline double mlp_gradient_error(nn::Mlp& net, const nn::MlpGradients& analytic, const std::function<double()>& loss,
                                 double h = 1e-5) {
    double worst = 0.0;
    auto numeric = [&](double& p) {
        const double saved = p;
        p = saved + h;
        const double up = loss();
        p = saved - h;
        const double down = loss();
        p = saved;
        return (up - down) / (2.0 * h);
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        auto& layer = net.layers()[l];
        Matrix nw(layer.weight.rows(), layer.weight.cols());
        for (Eigen::Index i = 0; i < nw.size(); ++i) nw.data()[i] = numeric(layer.weight.data()[i]);
        Vector nb(layer.bias.size());
        for (Eigen::Index i = 0; i < nb.size(); ++i) nb(i) = numeric(layer.bias(i));
        worst = std::max(worst, tensor_rel_error(analytic.weights[l], nw));
        worst = std::max(worst, tensor_rel_error(analytic.biases[l], nb));
    }
    return worst;
}

}  // namespace fpimpute::testing
