#include "fpimpute/matrix_completion.hpp"

#include <algorithm>
#include <cmath>

namespace fpimpute {

namespace {

Matrix mean_filled(const Matrix& data, const MissingMatrix& missing, Vector* means = nullptr) {
    require_shape(data.rows() == missing.rows() && data.cols() == missing.cols(), "mask shape does not match data");
    Matrix x = data;
    Vector mu(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        double sum = 0.0;
        Eigen::Index cnt = 0;
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            if (!missing(i, j)) {
                sum += data(i, j);
                ++cnt;
            }
        if (cnt == 0) throw DataError("feature " + std::to_string(j) + " has no observed values");
        mu(j) = sum / static_cast<double>(cnt);
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            if (missing(i, j)) x(i, j) = mu(j);
    }
    if (means) *means = mu;
    return x;
}

Eigen::JacobiSVD<Matrix> thin_svd(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (!svd.singularValues().allFinite()) throw NumericError("SVD failed to produce finite singular values");
    return svd;
}

}  // namespace

Vector soft_threshold(const Vector& singular_values, double lambda) {
    return (singular_values.array() - lambda).max(0.0).matrix();
}

double nuclear_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return thin_svd(m).singularValues().sum();
}

int rank_for_variance(const Matrix& data, const MissingMatrix& missing, double fraction) {
    Matrix x = mean_filled(data, missing);
    x.rowwise() -= x.colwise().mean();
    const Vector s2 = thin_svd(x).singularValues().array().square().matrix();
    const double total = s2.sum();
    if (total <= 0.0) return 1;
    double acc = 0.0;
    for (Eigen::Index r = 0; r < s2.size(); ++r) {
        acc += s2(r);
        if (acc >= fraction * total) return static_cast<int>(r + 1);
    }
    return static_cast<int>(s2.size());
}

PcaResult pca_impute(const Matrix& data, const MissingMatrix& missing, int rank, int max_iters, double tol) {
    const auto n = data.rows();
    const auto k = data.cols();
    if (rank < 1 || rank > std::min(n, k))
        throw ConfigError("PCA rank must lie in [1, min(n, K)] = [1, " + std::to_string(std::min(n, k)) + "]");
    PcaResult res;
    res.imputed = mean_filled(data, missing);
    const bool any_missing = missing.any();
    for (int it = 0; it < std::max(max_iters, 1); ++it) {
        res.mean = res.imputed.colwise().mean().transpose();
        Matrix centred = res.imputed.rowwise() - res.mean.transpose();
        const auto svd = thin_svd(centred);
        res.components = svd.matrixV().leftCols(rank);
        ++res.iterations;
        if (!any_missing) break;
        const Matrix recon = (svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal() *
                              res.components.transpose())
                                 .rowwise() +
                             res.mean.transpose();
        double change = 0.0;
        for (Eigen::Index j = 0; j < k; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                if (missing(i, j)) {
                    change = std::max(change, std::abs(recon(i, j) - res.imputed(i, j)));
                    res.imputed(i, j) = recon(i, j);
                }
        res.changes.push_back(change);
        if (change < tol) break;
    }
    return res;
}

Matrix pca_project_impute(const Matrix& data, const MissingMatrix& missing, const Vector& mean,
                          const Matrix& components, int max_iters, double tol) {
    require_shape(data.rows() == missing.rows() && data.cols() == missing.cols(), "mask shape does not match data");
    require_shape(mean.size() == data.cols() && components.rows() == data.cols(), "PCA model does not match data");
    Matrix x = data;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (missing(i, j)) x(i, j) = mean(j);
    if (!missing.any()) return x;
    const Matrix projector = components * components.transpose();
    for (int it = 0; it < max_iters; ++it) {
        const Matrix centred = x.rowwise() - mean.transpose();
        const Matrix recon = (centred * projector).rowwise() + mean.transpose();
        double change = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                if (missing(i, j)) {
                    change = std::max(change, std::abs(recon(i, j) - x(i, j)));
                    x(i, j) = recon(i, j);
                }
        if (change < tol) break;
    }
    return x;
}

std::vector<double> default_lambda_schedule(const Matrix& data, const MissingMatrix& missing, int steps,
                                            double start_ratio, double end_ratio) {
    if (steps < 1) throw ConfigError("lambda schedule needs at least one step");
    Matrix x = data;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (missing(i, j)) x(i, j) = 0.0;
    const double smax = thin_svd(x).singularValues()(0);
    std::vector<double> out;
    for (int s = 0; s < steps; ++s) {
        const double frac = steps == 1 ? 1.0 : static_cast<double>(s) / (steps - 1);
        out.push_back(smax * start_ratio * std::pow(end_ratio / start_ratio, frac));
    }
    return out;
}

SoftImputeResult soft_impute(const Matrix& data, const MissingMatrix& missing, const std::vector<double>& lambdas,
                             int max_iters, double tol, bool record_objective) {
    require_shape(data.rows() == missing.rows() && data.cols() == missing.cols(), "mask shape does not match data");
    if (lambdas.empty()) throw ConfigError("soft-impute needs a non-empty lambda schedule");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw ConfigError("soft-impute lambdas must be positive");
        if (i > 0 && lambdas[i] > lambdas[i - 1]) throw ConfigError("soft-impute lambdas must be non-increasing");
    }

    Matrix observed = data;
    for (Eigen::Index j = 0; j < data.cols(); ++j)
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            if (missing(i, j)) observed(i, j) = 0.0;

    SoftImputeResult res;
    Matrix z = Matrix::Zero(data.rows(), data.cols());
    for (double lambda : lambdas) {
        for (int it = 0; it < max_iters; ++it) {
            Matrix filled = observed;
            for (Eigen::Index j = 0; j < data.cols(); ++j)
                for (Eigen::Index i = 0; i < data.rows(); ++i)
                    if (missing(i, j)) filled(i, j) = z(i, j);
            const auto svd = thin_svd(filled);
            const Vector shrunk = soft_threshold(svd.singularValues(), lambda);
            Matrix next = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
            const double diff = (next - z).squaredNorm();
            const double base = z.squaredNorm();
            z = std::move(next);
            ++res.iterations;
            if (record_objective) {
                double fit = 0.0;
                for (Eigen::Index j = 0; j < data.cols(); ++j)
                    for (Eigen::Index i = 0; i < data.rows(); ++i)
                        if (!missing(i, j)) fit += (observed(i, j) - z(i, j)) * (observed(i, j) - z(i, j));
                res.objective_trace.push_back(0.5 * fit + lambda * shrunk.sum());
                res.lambda_trace.push_back(lambda);
            }
            if (diff == 0.0 || (base > 0.0 && diff / base < tol)) break;
        }
    }
    res.low_rank = z;
    res.imputed = data;
    for (Eigen::Index j = 0; j < data.cols(); ++j)
        for (Eigen::Index i = 0; i < data.rows(); ++i)
            if (missing(i, j)) res.imputed(i, j) = z(i, j);
    return res;
}

}  // namespace fpimpute
