#pragma once

#include "fpimpute/common.hpp"

#include <vector>

namespace fpimpute {

// max(s - lambda, 0) elementwise.
Vector soft_threshold(const Vector& singular_values, double lambda);

// Smallest rank whose leading components explain at least `fraction` of the
// variance of the mean-filled, centred data.
int rank_for_variance(const Matrix& data, const MissingMatrix& missing, double fraction = 0.9);

struct PcaResult {
    Matrix imputed;
    Vector mean;
    Matrix components;            // K x rank, orthonormal columns
    std::vector<double> changes;  // max masked-cell change per iteration
    int iterations = 0;
};

// Iterative PCA: mean fills, then {centre, rank-r SVD reconstruction,
// overwrite masked cells} until the largest masked change is below tol.
PcaResult pca_impute(const Matrix& data, const MissingMatrix& missing, int rank, int max_iters = 5000,
                     double tol = 1e-10);

// Projects new rows onto a fitted PCA model with the same iteration.
Matrix pca_project_impute(const Matrix& data, const MissingMatrix& missing, const Vector& mean,
                          const Matrix& components, int max_iters = 5000, double tol = 1e-10);

struct SoftImputeResult {
    Matrix imputed;
    Matrix low_rank;
    // 1/2 ||P_obs(X - Z)||^2 + lambda ||Z||_* after each inner iteration,
    // only filled when requested.
    std::vector<double> objective_trace;
    std::vector<double> lambda_trace;
    int iterations = 0;
};

// Geometric schedule from `start_ratio` to `end_ratio` times the largest
// singular value of the zero-filled observed matrix.
std::vector<double> default_lambda_schedule(const Matrix& data, const MissingMatrix& missing, int steps = 10,
                                            double start_ratio = 0.5, double end_ratio = 0.01);

double nuclear_norm(const Matrix& m);

// Soft-thresholded SVD iterations per lambda with warm starts. Convergence per
// lambda: ||Z_new - Z_old||_F^2 / ||Z_old||_F^2 < tol.
SoftImputeResult soft_impute(const Matrix& data, const MissingMatrix& missing, const std::vector<double>& lambdas,
                             int max_iters = 1000, double tol = 1e-9, bool record_objective = false);

}  // namespace fpimpute
