#pragma once

#include "fpimpute/dataset.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fpimpute::synthetic {

// x = z W + noise with a 3-dimensional standard-normal z.
Dataset linear_gaussian(Eigen::Index rows, std::uint64_t seed, int features = 8);

// Ten features on a two-dimensional manifold: t, s ~ U(-1, 1) mapped through
// sin, exp, tanh and products, plus Gaussian noise with std 0.02.
Dataset sinusoidal(Eigen::Index rows, std::uint64_t seed);

// Exact rank-1 matrix u v^T with u, v ~ N(0, 1).
Matrix rank1_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);
Dataset rank1(Eigen::Index rows, std::uint64_t seed, int features = 6);

// Two latent uniforms driving six continuous and four binary features.
Dataset mixed(Eigen::Index rows, std::uint64_t seed);

// Independent exponential(1) features. Right skew leaves most anchor means
// above the majority of cells, so high masking rates stay reachable.
Dataset skewed(Eigen::Index rows, std::uint64_t seed, int features = 10);

// Names accepted by make(): linear-gaussian, sinusoidal, rank1, mixed, skewed.
const std::vector<std::string>& names();
Dataset make(const std::string& name, Eigen::Index rows, std::uint64_t seed);

// The four datasets of the benchmark suite.
const std::vector<std::string>& suite();
// Datasets of the suite whose features depend nonlinearly on the latent.
bool is_nonlinear(const std::string& name);

}  // namespace fpimpute::synthetic
