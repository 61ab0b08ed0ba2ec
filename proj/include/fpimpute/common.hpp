#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace fpimpute {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// true = missing
using MissingMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

#ifndef FPIMPUTE_VERSION
#define FPIMPUTE_VERSION "0.0.0"
#endif
inline constexpr const char* kVersion = FPIMPUTE_VERSION;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Error hierarchy. The CLI maps each family onto an exit code:
// ConfigError -> 1, DataError -> 2, NumericError -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ShapeError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : DataError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}

    std::size_t row() const { return row_; }
    std::size_t column() const { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class NumericError : public Error {
public:
    using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

// Copy of `values` with every missing cell replaced by NaN.
inline Matrix hide_missing(const Matrix& values, const MissingMatrix& missing) {
    require_shape(values.rows() == missing.rows() && values.cols() == missing.cols(),
                  "mask shape does not match data");
    Matrix out = values;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            if (missing(i, j)) out(i, j) = kMissing;
    return out;
}

// SplitMix64 step; derives independent seeds for sub-components from one seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline MissingMatrix nan_pattern(const Matrix& values) {
    return values.array().isNaN();
}

}  // namespace fpimpute
