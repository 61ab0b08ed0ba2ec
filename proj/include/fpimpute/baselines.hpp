#pragma once

#include "fpimpute/common.hpp"
#include "fpimpute/missingness.hpp"

#include <cstddef>
#include <vector>

namespace fpimpute {

using MissingRow = Eigen::Array<bool, Eigen::Dynamic, 1>;

enum class ConstantStatistic { Mean, Median, Zero };

// Fills masked cells with a per-feature statistic of the observed cells.
Matrix constant_impute(const Matrix& data, const MissingMatrix& missing, ConstantStatistic statistic);
// Same, with the statistic taken from a separate (training) matrix.
Matrix constant_impute(const Matrix& data, const MissingMatrix& missing, ConstantStatistic statistic,
                       const FillStatistics& train_stats);

struct KnnStats {
    std::size_t fallbacks = 0;
};

// Distance between two rows over the features observed in both, divided by
// the number of such features: sqrt(sum_sq / shared). Infinity if none shared.
double partial_distance(const Eigen::Ref<const Vector>& a, const MissingRow& a_missing,
                        const Eigen::Ref<const Vector>& b, const MissingRow& b_missing);

// Each missing feature j of `row` gets the mean of j over the k nearest
// training rows that observe j; ties go to the lower row index. With no such
// row the feature mean of `train` is used and counted as a fallback.
Vector knn_impute(const Matrix& train, const MissingMatrix& train_missing, const Vector& row,
                  const MissingRow& row_missing, int k, KnnStats* stats = nullptr);

struct MiceResult {
    Matrix imputed;
    // Per feature: intercept followed by one slope per other feature (in
    // column order, skipping the feature itself). Empty when nothing was missing.
    std::vector<Vector> coefficients;
};

// Chained ridge regressions, starting from mean fills.
MiceResult mice_linear(const Matrix& data, const MissingMatrix& missing, int n_rounds = 10, double ridge = 1e-3);

}  // namespace fpimpute
