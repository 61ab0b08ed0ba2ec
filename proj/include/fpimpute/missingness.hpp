#pragma once

#include "fpimpute/dataset.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fpimpute {

enum class MaskStrategy { MnarUniform, MnarRandom };

std::string to_string(MaskStrategy s);
MaskStrategy parse_mask_strategy(const std::string& text);

struct Mask {
    MissingMatrix missing;  // true = missing
    MaskStrategy strategy = MaskStrategy::MnarRandom;
    double target_rate = 0.0;
    double achieved_rate = 0.0;
    double threshold = 0.0;  // final value of the row gate t
    std::array<Eigen::Index, 2> anchors{0, 1};
    std::uint64_t seed = 0;
    int iterations = 0;

    Eigen::Index missing_count() const { return missing.count(); }
};

struct MaskOptions {
    double tolerance = 0.005;
    int max_iterations = 200;
};

class GenerationError : public DataError {
public:
    GenerationError(const std::string& what, double max_achievable)
        : DataError(what), max_achievable_(max_achievable) {}
    double max_achievable() const { return max_achievable_; }

private:
    double max_achievable_;
};

// MNAR mask at target rate T. A row is eligible when v_i < t and either anchor
// lies below its column mean. Uniform masks the whole eligible row; random masks
// each cell of an eligible row whose own uniform draw is below t. The draws are
// fixed for the whole search, so the achieved rate is monotone in t and the
// search brackets t between evaluated points.
Mask generate_mask(const Matrix& data, double target_rate, MaskStrategy strategy, std::uint64_t seed,
                   const MaskOptions& options = {});
Mask generate_mask(const Dataset& data, double target_rate, MaskStrategy strategy, std::uint64_t seed,
                   const MaskOptions& options = {});

enum class InitPolicy { Mean, Median, Zero, Random };

std::string to_string(InitPolicy p);
InitPolicy parse_init_policy(const std::string& text);

// Per-feature statistics over observed cells only.
struct FillStatistics {
    Vector mean;
    Vector median;

    static FillStatistics from_observed(const Matrix& values, const MissingMatrix& missing);
};

double median_of(std::vector<double> values);

// Replaces masked cells per policy; unmasked cells are copied bit-exactly.
// Masked cells of `data` are never read.
Matrix apply_mask(const Matrix& data, const MissingMatrix& missing, InitPolicy policy, const FillStatistics& stats,
                  std::uint64_t seed = 0);
Matrix apply_mask(const Matrix& data, const MissingMatrix& missing, InitPolicy policy, std::uint64_t seed = 0);

void write_mask_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const MissingMatrix& missing);
void write_mask_metadata(const std::filesystem::path& path, const Mask& mask);

struct LoadedMask {
    std::vector<std::string> header;
    MissingMatrix missing;
};

// Accepts a 0/1 mask CSV or a data CSV whose NA cells are the missing ones.
// A file that contains any NA (or empty) cell, or any value other than 0/1, is
// read as NA-style.
LoadedMask read_mask(const std::filesystem::path& path);

}  // namespace fpimpute
