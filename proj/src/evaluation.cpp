#include "fpimpute/evaluation.hpp"

#include "fpimpute/adam.hpp"
#include "fpimpute/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace fpimpute {

std::string to_string(RmseMode m) { return m == RmseMode::All ? "all" : "missing"; }

RmseMode parse_rmse_mode(const std::string& text) {
    if (text == "all") return RmseMode::All;
    if (text == "missing" || text == "missing_only" || text == "missing-only") return RmseMode::MissingOnly;
    throw ConfigError("unknown rmse mode '" + text + "' (expected all or missing)");
}

double rmse_sum(const Matrix& pred, const Matrix& truth, const MissingMatrix& missing, RmseMode mode) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || missing.rows() != truth.rows() ||
        missing.cols() != truth.cols())
        throw MetricError("rmse_sum: prediction, truth and mask shapes differ");
    const Eigen::Index n = truth.rows();
    double total = 0.0;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        double sq = 0.0;
        Eigen::Index masked = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (missing(i, j)) ++masked;
            if (mode == RmseMode::MissingOnly && !missing(i, j)) continue;
            const double d = pred(i, j) - truth(i, j);
            sq += d * d;
        }
        const Eigen::Index denom = mode == RmseMode::All ? n : masked;
        if (denom == 0) continue;
        total += std::sqrt(sq / static_cast<double>(denom));
    }
    if (!std::isfinite(total)) throw MetricError("rmse_sum is not finite; prediction holds NaN or infinity");
    return total;
}

std::string to_string(TaskKind t) { return t == TaskKind::Classification ? "classification" : "regression"; }

TaskKind parse_task_kind(const std::string& text) {
    if (text == "classification") return TaskKind::Classification;
    if (text == "regression") return TaskKind::Regression;
    throw ConfigError("unknown task '" + text + "' (expected classification or regression)");
}

DownstreamLoss downstream_loss(const nn::Mlp& net, const Matrix& inputs, const Vector& targets, TaskKind task) {
    require_shape(inputs.rows() == targets.size(), "one target per input row expected");
    const auto trace = nn::forward_trace(net, inputs.transpose());
    const Matrix& out = trace.output();  // C x B
    const double b = static_cast<double>(inputs.rows());
    Matrix grad(out.rows(), out.cols());
    DownstreamLoss res;
    if (task == TaskKind::Regression) {
        require_shape(out.rows() == 1, "regression network needs one output");
        const Eigen::RowVectorXd r = out.row(0) - targets.transpose();
        res.value = 0.5 * r.squaredNorm() / b;
        grad.row(0) = r / b;
    } else {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const auto cls = static_cast<Eigen::Index>(targets(c));
            require_shape(cls >= 0 && cls < out.rows(), "class index outside the network output");
            const double m = out.col(c).maxCoeff();
            const Vector e = (out.col(c).array() - m).exp().matrix();
            const double z = e.sum();
            res.value += -(out(cls, c) - m - std::log(z));
            grad.col(c) = e / z;
            grad(cls, c) -= 1.0;
        }
        res.value /= b;
        grad /= b;
    }
    res.grads = nn::backward(net, trace, grad).params;
    return res;
}

DownstreamMetric downstream_eval(const Matrix& imputed_train, const Vector& train_labels, const Matrix& imputed_test,
                                 const Vector& test_labels, TaskKind task, std::uint64_t seed,
                                 const DownstreamConfig& cfg) {
    if (imputed_train.rows() != train_labels.size() || imputed_test.rows() != test_labels.size() ||
        imputed_train.cols() != imputed_test.cols())
        throw MetricError("downstream_eval: features and labels disagree in shape");
    if (!imputed_train.allFinite() || !imputed_test.allFinite())
        throw MetricError("downstream_eval: imputed matrices still contain missing values");
    if (!train_labels.allFinite() || !test_labels.allFinite())
        throw MetricError("downstream_eval: labels must be fully observed");
    if (imputed_train.rows() == 0 || imputed_test.rows() == 0) throw MetricError("downstream_eval: empty split");

    Vector train_t = train_labels;
    Vector test_t = test_labels;
    int outputs = 1;
    if (task == TaskKind::Classification) {
        std::vector<double> classes(train_labels.data(), train_labels.data() + train_labels.size());
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
        auto index_of = [&](double v) -> double {
            auto it = std::lower_bound(classes.begin(), classes.end(), v);
            if (it == classes.end() || *it != v)
                throw MetricError("downstream_eval: test class " + format_double(v) + " does not occur in training");
            return static_cast<double>(it - classes.begin());
        };
        for (Eigen::Index i = 0; i < train_t.size(); ++i) train_t(i) = index_of(train_t(i));
        for (Eigen::Index i = 0; i < test_t.size(); ++i) test_t(i) = index_of(test_t(i));
        outputs = static_cast<int>(classes.size());
    }

    std::mt19937_64 rng(seed);
    std::vector<int> sizes{static_cast<int>(imputed_train.cols())};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(outputs);
    nn::Mlp net = nn::Mlp::glorot(sizes, rng);
    auto adam = nn::AdamState::for_network(net, cfg.learning_rate);

    const Eigen::Index n = imputed_train.rows();
    const Eigen::Index bs = std::min<Eigen::Index>(std::max(cfg.batch_size, 1), n);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min(bs, n - start);
            Matrix x(len, imputed_train.cols());
            Vector y(len);
            for (Eigen::Index r = 0; r < len; ++r) {
                const auto src = order[static_cast<std::size_t>(start + r)];
                x.row(r) = imputed_train.row(src);
                y(r) = train_t(src);
            }
            nn::adam_step(net, downstream_loss(net, x, y, task).grads, adam);
        }
    }

    const Matrix out = nn::forward_batch(net, imputed_test.transpose());
    DownstreamMetric metric;
    metric.task = task;
    if (task == TaskKind::Regression) {
        metric.value = std::sqrt((out.row(0).transpose() - test_t).squaredNorm() / static_cast<double>(test_t.size()));
    } else {
        Eigen::Index correct = 0;
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            Eigen::Index best = 0;
            out.col(c).maxCoeff(&best);
            if (best == static_cast<Eigen::Index>(test_t(c))) ++correct;
        }
        metric.value = static_cast<double>(correct) / static_cast<double>(out.cols());
    }
    if (!std::isfinite(metric.value)) throw NumericError("downstream model diverged");
    return metric;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

}  // namespace

void write_report_csv(std::ostream& out, const std::vector<EvaluationReport>& reports) {
    out << "dataset,method,init_policy,strategy,rate,seed,train_achieved_rate,test_achieved_rate,"
           "rmse_sum_all,rmse_sum_missing,downstream_metric,downstream_value,knn_fallbacks,status,message\n";
    for (const auto& r : reports) {
        out << csv_field(r.dataset) << ',' << csv_field(r.method) << ',' << r.init_policy << ',' << r.strategy << ','
            << format_double(r.rate) << ',' << r.seed << ',';
        if (r.ok) {
            out << format_double(r.train_achieved_rate) << ',' << format_double(r.test_achieved_rate) << ','
                << format_double(r.rmse_sum_all) << ',' << format_double(r.rmse_sum_missing) << ',';
            if (r.downstream)
                out << (r.downstream->task == TaskKind::Classification ? "accuracy" : "rmse") << ','
                    << format_double(r.downstream->value);
            else
                out << ',';
            out << ',' << r.fallbacks << ",ok,\n";
        } else {
            out << ",,,,,,," << "failed," << csv_field(r.message) << '\n';
        }
    }
}

void write_timings_csv(std::ostream& out, const std::vector<EvaluationReport>& reports) {
    out << "dataset,method,init_policy,strategy,rate,seed,wall_time_s\n";
    for (const auto& r : reports)
        out << csv_field(r.dataset) << ',' << csv_field(r.method) << ',' << r.init_policy << ',' << r.strategy << ','
            << format_double(r.rate) << ',' << r.seed << ',' << fixed(r.wall_time_s, 3) << '\n';
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd m;
    m.count = values.size();
    if (values.empty()) return m;
    m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return m;
}

void write_report_markdown(std::ostream& out, const std::vector<EvaluationReport>& reports, RmseMode mode) {
    using GroupKey = std::pair<std::string, double>;
    using Column = std::pair<std::string, std::string>;  // method, init policy
    std::vector<GroupKey> groups;
    std::vector<std::string> datasets;
    std::vector<Column> columns;
    auto remember = [](auto& list, const auto& v) {
        if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
    };
    for (const auto& r : reports) {
        remember(groups, GroupKey{r.strategy, r.rate});
        remember(datasets, r.dataset);
        remember(columns, Column{r.method, r.init_policy});
    }
    out << "# Imputation error (RMSE_Sum, " << (mode == RmseMode::All ? "all entries" : "masked entries only")
        << ")\n";
    for (const auto& [strategy, rate] : groups) {
        out << "\n## " << strategy << ", rate " << format_double(rate) << "\n\n| dataset |";
        for (const auto& [m, init] : columns) out << ' ' << m << (init == "-" ? "" : "/" + init) << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
        out << '\n';
        for (const auto& d : datasets) {
            out << "| " << d << " |";
            for (const auto& [m, init] : columns) {
                std::vector<double> vals;
                std::size_t failed = 0;
                for (const auto& r : reports) {
                    if (r.dataset != d || r.method != m || r.strategy != strategy || r.rate != rate ||
                        r.init_policy != init)
                        continue;
                    if (r.ok)
                        vals.push_back(mode == RmseMode::All ? r.rmse_sum_all : r.rmse_sum_missing);
                    else
                        ++failed;
                }
                const auto ms = mean_std(vals);
                out << ' ';
                if (ms.count == 0)
                    out << (failed ? "failed" : "-");
                else
                    out << fixed(ms.mean, 4) << " ± " << fixed(ms.std, 4);
                if (failed && ms.count) out << " (" << failed << " failed)";
                out << " |";
            }
            out << '\n';
        }
    }
}

}  // namespace fpimpute
