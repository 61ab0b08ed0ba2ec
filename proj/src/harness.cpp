#include "fpimpute/harness.hpp"

#include "fpimpute/imputer.hpp"
#include "fpimpute/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace fpimpute {

namespace {

std::vector<std::string> expect_list(const Config& c, const std::string& key, std::vector<std::string> fallback) {
    if (!c.contains(key)) return fallback;
    auto v = c.get_list(key);
    if (v.empty()) throw ConfigError("spec key '" + key + "' is empty");
    return v;
}

bool is_stochastic(const std::string& method) {
    return method == "generative" || method == "ae" || method == "dae" || method == "rae";
}

std::string file_token(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

}  // namespace

ExperimentSpec ExperimentSpec::from_config(const Config& c, const std::filesystem::path& base_dir) {
    ExperimentSpec spec;
    spec.config = c;
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        std::filesystem::path path(p);
        if (path.is_relative() && !base_dir.empty()) return base_dir / path;
        return path;
    };

    for (const auto& name : c.children("dataset")) {
        const Config d = c.subtree("dataset." + name);
        DatasetSpec ds;
        ds.name = name;
        if (auto p = d.get("path")) ds.path = resolve(*p);
        if (auto p = d.get("schema")) ds.schema_path = resolve(*p);
        ds.synthetic = d.get_string("synthetic", "");
        if (ds.path.empty() && ds.synthetic.empty())
            throw ConfigError("dataset '" + name + "' needs either path or synthetic");
        if (!ds.path.empty() && !ds.synthetic.empty())
            throw ConfigError("dataset '" + name + "' sets both path and synthetic");
        ds.rows = static_cast<Eigen::Index>(d.get_int("rows", ds.rows));
        ds.data_seed = static_cast<std::uint64_t>(d.get_int("data_seed", 0));
        ds.label = d.get_string("label", "");
        ds.task = parse_task_kind(d.get_string("task", "classification"));
        spec.datasets.push_back(std::move(ds));
    }

    if (c.contains("rates")) spec.rates = c.get_double_list("rates");
    if (c.contains("strategies")) {
        spec.strategies.clear();
        for (const auto& s : expect_list(c, "strategies", {})) spec.strategies.push_back(parse_mask_strategy(s));
    }
    spec.methods = expect_list(c, "methods", {});
    if (c.contains("init_policies")) {
        spec.init_policies.clear();
        for (const auto& s : expect_list(c, "init_policies", {})) spec.init_policies.push_back(parse_init_policy(s));
    }
    if (c.contains("seeds")) {
        spec.seeds.clear();
        for (const auto& s : expect_list(c, "seeds", {})) {
            try {
                std::size_t used = 0;
                const auto v = std::stoull(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                spec.seeds.push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("seed '" + s + "' is not a non-negative integer");
            }
        }
    }
    if (auto p = c.get("output_dir")) spec.output_dir = resolve(*p);
    spec.test_fraction = c.get_double("test_fraction", spec.test_fraction);
    spec.imputations = static_cast<int>(c.get_int("imputations", spec.imputations));
    spec.save_imputed = c.get_bool("save_imputed", spec.save_imputed);
    spec.downstream = c.get_bool("downstream", spec.downstream);
    spec.jobs = static_cast<int>(c.get_int("jobs", spec.jobs));
    spec.validate();
    return spec;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
    return from_config(Config::load(path), path.parent_path());
}

void ExperimentSpec::validate() const {
    if (datasets.empty()) throw ConfigError("experiment spec lists no datasets");
    if (methods.empty()) throw ConfigError("experiment spec lists no methods");
    if (rates.empty() || strategies.empty() || seeds.empty() || init_policies.empty())
        throw ConfigError("experiment spec has an empty axis");
    for (double r : rates)
        if (!(r > 0.0 && r < 1.0)) throw ConfigError("rate " + format_double(r) + " is outside (0, 1)");
    for (const auto& m : methods)
        if (!is_registered_imputer(m)) throw ConfigError("unknown imputation method '" + m + "'");
    std::set<std::uint64_t> distinct(seeds.begin(), seeds.end());
    if (distinct.size() != seeds.size()) throw ConfigError("experiment seeds must be distinct");
    std::set<std::string> names;
    for (const auto& d : datasets)
        if (!names.insert(d.name).second) throw ConfigError("dataset '" + d.name + "' is listed twice");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
    if (imputations < 1) throw ConfigError("imputations must be at least 1");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
}

LoadedDataset load_dataset(const DatasetSpec& spec) {
    Dataset full;
    if (!spec.synthetic.empty()) {
        full = synthetic::make(spec.synthetic, spec.rows, spec.data_seed);
    } else {
        const SchemaSpec schema = spec.schema_path.empty() ? SchemaSpec{} : SchemaSpec::load(spec.schema_path);
        full = load_csv(spec.path, schema);
    }
    LoadedDataset out;
    if (spec.label.empty()) {
        out.features = std::move(full);
        return out;
    }
    if (!full.column_index(spec.label))
        throw ConfigError("dataset '" + spec.name + "' has no label column '" + spec.label + "'");
    auto [features, labels] = extract_column(full, spec.label);
    out.features = std::move(features);
    out.labels = std::move(labels);
    return out;
}

std::vector<Cell> expand_grid(const ExperimentSpec& spec) {
    std::vector<Cell> cells;
    for (std::size_t d = 0; d < spec.datasets.size(); ++d)
        for (auto strategy : spec.strategies)
            for (double rate : spec.rates)
                for (const auto& method : spec.methods) {
                    std::vector<std::optional<InitPolicy>> inits;
                    if (method == "generative")
                        inits.assign(spec.init_policies.begin(), spec.init_policies.end());
                    else
                        inits.push_back(std::nullopt);
                    for (const auto& init : inits)
                        for (auto seed : spec.seeds) cells.push_back(Cell{d, rate, strategy, method, init, seed});
                }
    return cells;
}

std::uint64_t mask_seed(std::uint64_t seed, double rate, MaskStrategy strategy, bool test_split) {
    const auto rate_bits = std::bit_cast<std::uint64_t>(rate);
    std::uint64_t s = derive_seed(seed, test_split ? 3 : 2);
    s = derive_seed(s, rate_bits);
    return derive_seed(s, strategy == MaskStrategy::MnarUniform ? 1 : 0);
}

EvaluationReport run_cell(const ExperimentSpec& spec, const std::vector<LoadedDataset>& data, const Cell& cell,
                          const std::filesystem::path& imputed_dir) {
    const auto start = std::chrono::steady_clock::now();
    const DatasetSpec& ds = spec.datasets.at(cell.dataset);
    EvaluationReport rep;
    rep.dataset = ds.name;
    rep.method = cell.method;
    rep.init_policy = cell.init_policy ? to_string(*cell.init_policy) : "-";
    rep.strategy = to_string(cell.strategy);
    rep.rate = cell.rate;
    rep.seed = cell.seed;
    try {
        const LoadedDataset& loaded = data.at(cell.dataset);
        if (!loaded.features.fully_observed())
            throw DataError("dataset '" + ds.name + "' already has missing cells; masking needs complete data");

        const auto parts = split(loaded.features, spec.test_fraction, derive_seed(cell.seed, 1));
        auto [train, params] = minmax_fit_transform(parts.train);
        const Dataset test = minmax_apply(parts.test, params);

        const Mask train_mask =
            generate_mask(train.values, cell.rate, cell.strategy, mask_seed(cell.seed, cell.rate, cell.strategy, false));
        const Mask test_mask =
            generate_mask(test.values, cell.rate, cell.strategy, mask_seed(cell.seed, cell.rate, cell.strategy, true));
        rep.train_achieved_rate = train_mask.achieved_rate;
        rep.test_achieved_rate = test_mask.achieved_rate;

        Config config = spec.config;
        if (cell.init_policy) config.set("generative.init_policy", to_string(*cell.init_policy));
        const bool want_downstream = spec.downstream && loaded.labels.has_value();
        const int draws = is_stochastic(cell.method) ? spec.imputations : 1;

        Matrix test_sum = Matrix::Zero(test.rows(), test.cols());
        Matrix train_sum = Matrix::Zero(train.rows(), train.cols());
        std::size_t fallbacks = 0;
        for (int draw = 0; draw < draws; ++draw) {
            auto imputer =
                make_imputer(cell.method, config, derive_seed(cell.seed, 1000 + static_cast<std::uint64_t>(draw)),
                             train.schema);
            if (want_downstream)
                train_sum += imputer->fit_transform(train.values, train_mask.missing);
            else
                imputer->fit(train.values, train_mask.missing);
            test_sum += imputer->transform(test.values, test_mask.missing);
            fallbacks += imputer->fallback_count();
        }
        // Averaging is only applied to masked cells so observed ones stay bit-exact.
        Matrix imputed = test.values;
        for (Eigen::Index j = 0; j < imputed.cols(); ++j)
            for (Eigen::Index i = 0; i < imputed.rows(); ++i)
                if (test_mask.missing(i, j)) imputed(i, j) = test_sum(i, j) / draws;

        rep.rmse_sum_all = rmse_sum(imputed, test.values, test_mask.missing, RmseMode::All);
        rep.rmse_sum_missing = rmse_sum(imputed, test.values, test_mask.missing, RmseMode::MissingOnly);
        rep.fallbacks = fallbacks;

        if (want_downstream) {
            Matrix imputed_train = train.values;
            for (Eigen::Index j = 0; j < imputed_train.cols(); ++j)
                for (Eigen::Index i = 0; i < imputed_train.rows(); ++i)
                    if (train_mask.missing(i, j)) imputed_train(i, j) = train_sum(i, j) / draws;
            Vector train_labels(static_cast<Eigen::Index>(parts.train_rows.size()));
            Vector test_labels(static_cast<Eigen::Index>(parts.test_rows.size()));
            for (std::size_t r = 0; r < parts.train_rows.size(); ++r)
                train_labels(static_cast<Eigen::Index>(r)) = (*loaded.labels)(parts.train_rows[r]);
            for (std::size_t r = 0; r < parts.test_rows.size(); ++r)
                test_labels(static_cast<Eigen::Index>(r)) = (*loaded.labels)(parts.test_rows[r]);
            rep.downstream = downstream_eval(imputed_train, train_labels, imputed, test_labels, ds.task,
                                             derive_seed(cell.seed, 7));
        }

        if (!imputed_dir.empty()) {
            const std::string file = file_token(ds.name) + "_" + rep.strategy + "_" + format_double(cell.rate) + "_" +
                                     file_token(cell.method) + "_" + rep.init_policy + "_" +
                                     std::to_string(cell.seed) + ".csv";
            write_csv(imputed_dir / file, test.header(), imputed);
        }
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.message = e.what();
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

namespace {

void write_outputs_to(const ExperimentSpec& spec, const std::vector<EvaluationReport>& reports,
                      const std::string& markdown_title_suffix) {
    const auto& dir = spec.output_dir;
    {
        std::ofstream out(dir / "report.csv", std::ios::binary);
        write_report_csv(out, reports);
        if (!out) throw DataError("cannot write " + (dir / "report.csv").string());
    }
    {
        std::ofstream out(dir / "report.md", std::ios::binary);
        write_report_markdown(out, reports, RmseMode::All);
        out << '\n';
        write_report_markdown(out, reports, RmseMode::MissingOnly);
        out << markdown_title_suffix;
        if (!out) throw DataError("cannot write " + (dir / "report.md").string());
    }
    {
        std::ofstream out(dir / "timings.csv", std::ios::binary);
        write_timings_csv(out, reports);
    }
    {
        std::ofstream out(dir / "manifest.txt", std::ios::binary);
        write_manifest(out, spec, reports);
    }
}

std::vector<EvaluationReport> run_grid(const ExperimentSpec& spec, bool write_outputs, const ProgressFn& progress,
                                       const std::string& markdown_extra) {
    spec.validate();
    std::vector<LoadedDataset> data;
    data.reserve(spec.datasets.size());
    for (const auto& d : spec.datasets) data.push_back(load_dataset(d));

    std::filesystem::path imputed_dir;
    if (write_outputs) {
        std::filesystem::create_directories(spec.output_dir);
        if (spec.save_imputed) {
            imputed_dir = spec.output_dir / "imputed";
            std::filesystem::create_directories(imputed_dir);
        }
    }

    const auto cells = expand_grid(spec);
    std::vector<EvaluationReport> reports(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            reports[i] = run_cell(spec, data, cells[i], imputed_dir);
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(reports[i]);
            }
        }
    };
    const auto n_workers = static_cast<std::size_t>(std::max(1, spec.jobs));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < std::min(n_workers, cells.size()); ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    if (write_outputs) {
        std::string extra = markdown_extra;
        write_outputs_to(spec, reports, extra);
    }
    return reports;
}

}  // namespace

std::vector<EvaluationReport> run(const ExperimentSpec& spec, bool write_outputs, const ProgressFn& progress) {
    return run_grid(spec, write_outputs, progress, "");
}

std::vector<EvaluationReport> init_study(ExperimentSpec spec, bool write_outputs, const ProgressFn& progress) {
    spec.methods = {"generative"};
    const std::set<InitPolicy> listed(spec.init_policies.begin(), spec.init_policies.end());
    const std::set<InitPolicy> required{InitPolicy::Mean, InitPolicy::Median, InitPolicy::Zero, InitPolicy::Random};
    if (!std::includes(listed.begin(), listed.end(), required.begin(), required.end()))
        spec.init_policies = {InitPolicy::Mean, InitPolicy::Zero, InitPolicy::Median, InitPolicy::Random};

    // The summary needs the reports, so run without writing and append it afterwards.
    auto reports = run_grid(spec, false, progress, "");
    if (write_outputs) {
        std::ostringstream extra;
        extra << "\n# Initialization study\n\nMedian across datasets of the per-dataset mean RMSE_Sum.\n\n"
              << "| init policy | median (all) | median (missing) |\n|---|---|---|\n";
        const auto all = init_policy_medians(reports, RmseMode::All);
        const auto missing = init_policy_medians(reports, RmseMode::MissingOnly);
        for (const auto& [policy, value] : all)
            extra << "| " << policy << " | " << format_double(value) << " | " << format_double(missing.at(policy))
                  << " |\n";
        std::filesystem::create_directories(spec.output_dir);
        write_outputs_to(spec, reports, extra.str());
    }
    return reports;
}

std::map<std::string, double> init_policy_medians(const std::vector<EvaluationReport>& reports, RmseMode mode) {
    std::map<std::string, std::map<std::string, std::vector<double>>> by_policy;
    for (const auto& r : reports) {
        if (!r.ok || r.method != "generative") continue;
        by_policy[r.init_policy][r.dataset].push_back(mode == RmseMode::All ? r.rmse_sum_all : r.rmse_sum_missing);
    }
    std::map<std::string, double> out;
    for (const auto& [policy, per_dataset] : by_policy) {
        std::vector<double> means;
        for (const auto& [name, vals] : per_dataset) means.push_back(mean_std(vals).mean);
        out[policy] = median_of(means);
    }
    return out;
}

void write_manifest(std::ostream& out, const ExperimentSpec& spec, const std::vector<EvaluationReport>& reports) {
    out << "fpimpute_version = " << kVersion << '\n';
    out << "datasets = ";
    for (std::size_t i = 0; i < spec.datasets.size(); ++i) out << (i ? ", " : "") << spec.datasets[i].name;
    out << "\nmethods = ";
    for (std::size_t i = 0; i < spec.methods.size(); ++i) out << (i ? ", " : "") << spec.methods[i];
    out << "\nrates = ";
    for (std::size_t i = 0; i < spec.rates.size(); ++i) out << (i ? ", " : "") << format_double(spec.rates[i]);
    out << "\nstrategies = ";
    for (std::size_t i = 0; i < spec.strategies.size(); ++i) out << (i ? ", " : "") << to_string(spec.strategies[i]);
    out << "\ninit_policies = ";
    for (std::size_t i = 0; i < spec.init_policies.size(); ++i)
        out << (i ? ", " : "") << to_string(spec.init_policies[i]);
    out << "\nseeds = ";
    for (std::size_t i = 0; i < spec.seeds.size(); ++i) out << (i ? ", " : "") << spec.seeds[i];
    out << "\ntest_fraction = " << format_double(spec.test_fraction);
    out << "\nimputations = " << spec.imputations;
    out << "\ncells = " << reports.size();
    const auto failed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.ok; });
    out << "\nfailed_cells = " << failed << '\n';
    for (const auto& r : reports)
        if (!r.ok)
            out << "failure = " << r.dataset << " / " << r.method << " / " << r.strategy << " / "
                << format_double(r.rate) << " / seed " << r.seed << ": " << r.message << '\n';
    out << "[config]\n";
    for (const auto& [k, v] : spec.config.entries()) out << k << " = " << v << '\n';
}

}  // namespace fpimpute
