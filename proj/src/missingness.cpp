#include "fpimpute/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace fpimpute {

std::string to_string(MaskStrategy s) { return s == MaskStrategy::MnarUniform ? "mnar-uniform" : "mnar-random"; }

MaskStrategy parse_mask_strategy(const std::string& text) {
    if (text == "mnar-uniform") return MaskStrategy::MnarUniform;
    if (text == "mnar-random") return MaskStrategy::MnarRandom;
    throw ConfigError("unknown mask strategy '" + text + "' (expected mnar-uniform or mnar-random)");
}

std::string to_string(InitPolicy p) {
    switch (p) {
        case InitPolicy::Mean: return "mean";
        case InitPolicy::Median: return "median";
        case InitPolicy::Zero: return "zero";
        case InitPolicy::Random: return "random";
    }
    return "mean";
}

InitPolicy parse_init_policy(const std::string& text) {
    if (text == "mean") return InitPolicy::Mean;
    if (text == "median") return InitPolicy::Median;
    if (text == "zero") return InitPolicy::Zero;
    if (text == "random") return InitPolicy::Random;
    throw ConfigError("unknown init policy '" + text + "' (expected mean, median, zero or random)");
}

namespace {

struct MaskDraws {
    std::vector<double> row_gate;  // v
    Matrix cell_gate;              // per-cell draws for the random strategy
    std::vector<bool> anchor_eligible;
};

Eigen::Index masked_cells(const MaskDraws& d, MaskStrategy strategy, double t, Eigen::Index k) {
    Eigen::Index count = 0;
    for (std::size_t i = 0; i < d.row_gate.size(); ++i) {
        if (!(d.row_gate[i] < t && d.anchor_eligible[i])) continue;
        if (strategy == MaskStrategy::MnarUniform) {
            count += k;
        } else {
            const auto row = static_cast<Eigen::Index>(i);
            for (Eigen::Index j = 0; j < k; ++j) count += d.cell_gate(row, j) < t ? 1 : 0;
        }
    }
    return count;
}

MissingMatrix build(const MaskDraws& d, MaskStrategy strategy, double t, Eigen::Index k) {
    const auto n = static_cast<Eigen::Index>(d.row_gate.size());
    MissingMatrix m = MissingMatrix::Constant(n, k, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        if (!(d.row_gate[ui] < t && d.anchor_eligible[ui])) continue;
        for (Eigen::Index j = 0; j < k; ++j)
            m(i, j) = strategy == MaskStrategy::MnarUniform || d.cell_gate(i, j) < t;
    }
    return m;
}

}  // namespace

Mask generate_mask(const Matrix& data, double target_rate, MaskStrategy strategy, std::uint64_t seed,
                   const MaskOptions& options) {
    if (!(target_rate > 0.0 && target_rate < 1.0))
        throw ConfigError("target missing rate must lie strictly between 0 and 1");
    const Eigen::Index n = data.rows();
    const Eigen::Index k = data.cols();
    if (k < 3) throw DataError("mask generation needs at least 3 features");
    if (n < 1) throw DataError("mask generation needs at least one row");
    if (data.array().isNaN().any()) throw DataError("mask generation requires a fully observed dataset");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, k - 1);
    const Eigen::Index a1 = pick(rng);
    Eigen::Index a2 = pick(rng);
    while (a2 == a1) a2 = pick(rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MaskDraws draws;
    draws.row_gate.resize(static_cast<std::size_t>(n));
    for (auto& v : draws.row_gate) v = unit(rng);
    draws.cell_gate.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) draws.cell_gate(i, j) = unit(rng);

    const double mean1 = data.col(a1).mean();
    const double mean2 = data.col(a2).mean();
    draws.anchor_eligible.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        draws.anchor_eligible[static_cast<std::size_t>(i)] = data(i, a1) < mean1 || data(i, a2) < mean2;

    const double total = static_cast<double>(n * k);
    auto rate_at = [&](double t) { return static_cast<double>(masked_cells(draws, strategy, t, k)) / total; };

    const double max_rate = rate_at(1.0);
    if (max_rate < target_rate - options.tolerance)
        throw GenerationError("target missing rate " + format_double(target_rate) +
                                  " is unreachable; the maximum achievable rate is " + format_double(max_rate),
                              max_rate);

    double lo = 0.0;
    double hi = 1.0;
    double t = target_rate;
    int iter = 0;
    bool found = false;
    for (; iter < options.max_iterations; ++iter) {
        const double p = rate_at(t);
        if (std::abs(p - target_rate) <= options.tolerance) {
            found = true;
            break;
        }
        if (p < target_rate)
            lo = t;
        else
            hi = t;
        double proposal = p > 0.0 ? std::min(t * target_rate / p, 1.0) : hi;
        if (!(proposal > lo && proposal < hi)) proposal = 0.5 * (lo + hi);
        t = proposal;
    }
    if (!found) {
        if (std::abs(max_rate - target_rate) > options.tolerance)
            throw GenerationError("missing-rate search did not converge within " +
                                      std::to_string(options.max_iterations) + " iterations",
                                  max_rate);
        t = 1.0;
    }

    Mask mask;
    mask.missing = build(draws, strategy, t, k);
    mask.strategy = strategy;
    mask.target_rate = target_rate;
    mask.achieved_rate = static_cast<double>(mask.missing.count()) / total;
    mask.threshold = t;
    mask.anchors = {a1, a2};
    mask.seed = seed;
    mask.iterations = iter + 1;
    return mask;
}

Mask generate_mask(const Dataset& data, double target_rate, MaskStrategy strategy, std::uint64_t seed,
                   const MaskOptions& options) {
    return generate_mask(data.values, target_rate, strategy, seed, options);
}

double median_of(std::vector<double> values) {
    if (values.empty()) return kMissing;
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

FillStatistics FillStatistics::from_observed(const Matrix& values, const MissingMatrix& missing) {
    require_shape(values.rows() == missing.rows() && values.cols() == missing.cols(), "mask shape does not match data");
    FillStatistics s;
    s.mean.resize(values.cols());
    s.median.resize(values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        std::vector<double> seen;
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            if (!missing(i, j) && !std::isnan(values(i, j))) seen.push_back(values(i, j));
        double sum = 0.0;
        for (double v : seen) sum += v;
        s.mean(j) = seen.empty() ? kMissing : sum / static_cast<double>(seen.size());
        s.median(j) = median_of(std::move(seen));
    }
    return s;
}

Matrix apply_mask(const Matrix& data, const MissingMatrix& missing, InitPolicy policy, const FillStatistics& stats,
                  std::uint64_t seed) {
    require_shape(data.rows() == missing.rows() && data.cols() == missing.cols(), "mask shape does not match data");
    require_shape(stats.mean.size() == data.cols(), "fill statistics do not match feature count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix out = data;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (!missing(i, j)) continue;
            double fill = 0.0;
            switch (policy) {
                case InitPolicy::Mean: fill = stats.mean(j); break;
                case InitPolicy::Median: fill = stats.median(j); break;
                case InitPolicy::Zero: fill = 0.0; break;
                case InitPolicy::Random: fill = gauss(rng); break;
            }
            if (std::isnan(fill))
                throw DataError("feature " + std::to_string(j) + " has no observed values to compute a " +
                                to_string(policy) + " fill");
            out(i, j) = fill;
        }
    }
    return out;
}

Matrix apply_mask(const Matrix& data, const MissingMatrix& missing, InitPolicy policy, std::uint64_t seed) {
    return apply_mask(data, missing, policy, FillStatistics::from_observed(data, missing), seed);
}

void write_mask_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const MissingMatrix& missing) {
    write_csv(path, header, missing.cast<double>().matrix());
}

void write_mask_metadata(const std::filesystem::path& path, const Mask& mask) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "strategy = " << to_string(mask.strategy) << '\n'
        << "target_rate = " << format_double(mask.target_rate) << '\n'
        << "achieved_rate = " << format_double(mask.achieved_rate) << '\n'
        << "threshold = " << format_double(mask.threshold) << '\n'
        << "seed = " << mask.seed << '\n'
        << "anchor_1 = " << mask.anchors[0] << '\n'
        << "anchor_2 = " << mask.anchors[1] << '\n'
        << "iterations = " << mask.iterations << '\n';
}

LoadedMask read_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mask " + path.string());
    auto records = read_csv_records(in);
    if (records.empty()) throw DataError("mask file " + path.string() + " has no header");
    LoadedMask lm;
    lm.header = records.front();
    const auto n = static_cast<Eigen::Index>(records.size() - 1);
    const auto k = static_cast<Eigen::Index>(lm.header.size());
    bool zero_one = true;
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (static_cast<Eigen::Index>(records[r].size()) != k)
            throw DataError("ragged mask file " + path.string() + " at line " + std::to_string(r + 1));
        for (const auto& f : records[r])
            if (f != "0" && f != "1") zero_one = false;
    }
    lm.missing.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& f = records[static_cast<std::size_t>(i + 1)][static_cast<std::size_t>(j)];
            lm.missing(i, j) = zero_one ? f == "1" : (f.empty() || f == "NA");
        }
    return lm;
}

}  // namespace fpimpute
