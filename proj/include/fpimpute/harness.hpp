#pragma once

#include "fpimpute/config.hpp"
#include "fpimpute/dataset.hpp"
#include "fpimpute/evaluation.hpp"
#include "fpimpute/missingness.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fpimpute {

struct DatasetSpec {
    std::string name;
    std::filesystem::path path;         // CSV file; empty for synthetic data
    std::filesystem::path schema_path;  // optional schema sidecar
    std::string synthetic;              // generator name when no path is given
    Eigen::Index rows = 600;            // synthetic only
    std::uint64_t data_seed = 0;        // synthetic only
    std::string label;                  // optional label column, excluded from the features
    TaskKind task = TaskKind::Classification;
};

// Spec file layout (see README for the full schema):
//
//   output_dir = results
//   seeds = [1, 2, 3]
//   rates = [0.25, 0.5, 0.75]
//   strategies = [mnar-random, mnar-uniform]
//   methods = [generative, mean, zero]
//   [dataset.sinusoidal]
//   synthetic = sinusoidal
//   [generative]
//   epochs = 100
struct ExperimentSpec {
    std::vector<DatasetSpec> datasets;
    std::vector<double> rates{0.25, 0.5, 0.75};
    std::vector<MaskStrategy> strategies{MaskStrategy::MnarRandom, MaskStrategy::MnarUniform};
    std::vector<std::string> methods;
    std::vector<InitPolicy> init_policies{InitPolicy::Mean};
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path output_dir = "results";
    double test_fraction = kDefaultTestFraction;
    // Multiple imputation: stochastic methods are refit this many times with
    // derived seeds and their test imputations averaged.
    int imputations = 5;
    bool save_imputed = false;
    bool downstream = true;  // evaluate datasets that declare a label
    int jobs = 1;
    Config config;  // method hyperparameters (generative.*, baselines.*)

    static ExperimentSpec from_config(const Config& config, const std::filesystem::path& base_dir = {});
    static ExperimentSpec load(const std::filesystem::path& path);
    void validate() const;
};

// Features, labels and schema of one loaded dataset.
struct LoadedDataset {
    Dataset features;
    std::optional<Vector> labels;
};

LoadedDataset load_dataset(const DatasetSpec& spec);

struct Cell {
    std::size_t dataset = 0;
    double rate = 0.0;
    MaskStrategy strategy = MaskStrategy::MnarRandom;
    std::string method;
    std::optional<InitPolicy> init_policy;  // generative only
    std::uint64_t seed = 0;
};

// Grid cells in report order: dataset, strategy, rate, method, init policy, seed.
std::vector<Cell> expand_grid(const ExperimentSpec& spec);

// Seeds of the masks for one (rate, strategy, seed) triple; every method and
// init policy of that triple sees the same masks.
std::uint64_t mask_seed(std::uint64_t seed, double rate, MaskStrategy strategy, bool test_split);

using ProgressFn = std::function<void(const EvaluationReport&)>;

// Runs one cell. Errors are recorded in the report rather than thrown.
EvaluationReport run_cell(const ExperimentSpec& spec, const std::vector<LoadedDataset>& data, const Cell& cell,
                          const std::filesystem::path& imputed_dir = {});

// Full factorial run. Writes report.csv, report.md, timings.csv and
// manifest.txt to spec.output_dir when `write_outputs` is set.
std::vector<EvaluationReport> run(const ExperimentSpec& spec, bool write_outputs = true,
                                  const ProgressFn& progress = {});

// Same as run() restricted to the generative method over all four init
// policies (or the ones listed in the spec, when it lists at least four).
std::vector<EvaluationReport> init_study(ExperimentSpec spec, bool write_outputs = true,
                                         const ProgressFn& progress = {});

// Per init policy: the median across datasets of the per-dataset mean RMSE_Sum.
std::map<std::string, double> init_policy_medians(const std::vector<EvaluationReport>& reports, RmseMode mode);

void write_manifest(std::ostream& out, const ExperimentSpec& spec, const std::vector<EvaluationReport>& reports);

}  // namespace fpimpute
