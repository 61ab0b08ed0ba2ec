#pragma once

#include "fpimpute/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fpimpute {

enum class FeatureKind { Continuous, Binary, Categorical, Ordinal };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);

struct FeatureSchema {
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    // Raw labels in code order (code = index). Empty for continuous features.
    std::vector<std::string> labels;
};

// Per-column declarations read from the schema sidecar. Columns that are not
// declared are continuous.
struct SchemaSpec {
    struct Entry {
        FeatureKind kind = FeatureKind::Continuous;
        std::vector<std::string> label_order;  // empty = discover, sorted
    };
    std::map<std::string, Entry> columns;

    static SchemaSpec parse(std::istream& in);
    static SchemaSpec load(const std::filesystem::path& path);
};

struct MinMaxParams {
    Vector min;
    Vector max;

    Eigen::Index size() const { return min.size(); }
};

enum class SplitTag { Full, Train, Test };

struct Dataset {
    Matrix values;  // n x K, NaN marks a cell that is missing in the source
    std::vector<FeatureSchema> schema;
    std::optional<MinMaxParams> normalization;
    SplitTag split_tag = SplitTag::Full;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    std::vector<std::string> header() const;
    std::optional<Eigen::Index> column_index(const std::string& name) const;
    bool fully_observed() const { return !values.array().isNaN().any(); }
};

Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& spec = {});
Dataset parse_csv(std::istream& in, const SchemaSpec& spec = {});

// RFC-4180 record splitting; exposed for mask files.
std::vector<std::vector<std::string>> read_csv_records(std::istream& in);

// NaN cells are written as the literal token NA. Values use the shortest
// representation that round-trips.
void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& values);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values);
std::string format_double(double v);

// Removes one column and returns it separately (used for downstream labels).
std::pair<Dataset, Vector> extract_column(const Dataset& data, const std::string& name);

MinMaxParams minmax_fit(const Dataset& train);
Dataset minmax_apply(const Dataset& data, const MinMaxParams& params);
std::pair<Dataset, MinMaxParams> minmax_fit_transform(const Dataset& train);
Matrix minmax_normalize(const Matrix& values, const MinMaxParams& params);
Matrix minmax_denormalize(const Matrix& values, const MinMaxParams& params);

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows;
};

inline constexpr double kDefaultTestFraction = 0.18;

SplitResult split(const Dataset& data, double test_fraction, std::uint64_t seed);
Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows);
MissingMatrix select_rows(const MissingMatrix& m, const std::vector<Eigen::Index>& rows);

}  // namespace fpimpute
