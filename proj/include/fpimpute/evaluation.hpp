#pragma once

#include "fpimpute/common.hpp"
#include "fpimpute/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fpimpute {

class MetricError : public DataError {
public:
    using DataError::DataError;
};

enum class RmseMode { All, MissingOnly };

std::string to_string(RmseMode m);
RmseMode parse_rmse_mode(const std::string& text);

// Sum over features of the per-feature root mean squared error. The
// denominator of feature j is n (All) or the number of masked cells of j
// (MissingOnly, where features without masked cells contribute 0).
double rmse_sum(const Matrix& pred, const Matrix& truth, const MissingMatrix& missing, RmseMode mode);

enum class TaskKind { Classification, Regression };

std::string to_string(TaskKind t);
TaskKind parse_task_kind(const std::string& text);

struct DownstreamConfig {
    std::vector<int> hidden{64, 32};
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
};

struct DownstreamMetric {
    TaskKind task = TaskKind::Classification;
    double value = 0.0;  // accuracy or RMSE
};

// Softmax cross entropy (classes given as indices) or squared error, averaged
// over the batch. Rows are samples; gradients are d loss / d weights.
struct DownstreamLoss {
    double value = 0.0;
    nn::MlpGradients grads;
};
DownstreamLoss downstream_loss(const nn::Mlp& net, const Matrix& inputs, const Vector& targets, TaskKind task);

// Trains an MLP on the imputed training rows and scores it on the test rows.
// Classification labels are arbitrary values; each distinct training value is
// one class.
DownstreamMetric downstream_eval(const Matrix& imputed_train, const Vector& train_labels, const Matrix& imputed_test,
                                 const Vector& test_labels, TaskKind task, std::uint64_t seed,
                                 const DownstreamConfig& cfg = {});

struct EvaluationReport {
    std::string dataset;
    std::string method;
    std::string init_policy;
    std::string strategy;
    double rate = 0.0;
    std::uint64_t seed = 0;
    double train_achieved_rate = 0.0;
    double test_achieved_rate = 0.0;
    double rmse_sum_all = 0.0;
    double rmse_sum_missing = 0.0;
    std::optional<DownstreamMetric> downstream;
    std::size_t fallbacks = 0;
    bool ok = true;
    std::string message;  // failure reason
    double wall_time_s = 0.0;
};

// One row per report. Wall time is left out so identical runs give identical
// files; see write_timings_csv.
void write_report_csv(std::ostream& out, const std::vector<EvaluationReport>& reports);
void write_timings_csv(std::ostream& out, const std::vector<EvaluationReport>& reports);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
    std::size_t count = 0;
};
MeanStd mean_std(const std::vector<double>& values);

// One table per (strategy, rate, init policy): datasets as rows, methods as
// columns, cells "mean ± std" of rmse_sum over seeds.
void write_report_markdown(std::ostream& out, const std::vector<EvaluationReport>& reports, RmseMode mode);

}  // namespace fpimpute
