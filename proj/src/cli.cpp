#include "fpimpute/cli.hpp"

#include "fpimpute/checkpoint.hpp"
#include "fpimpute/evaluation.hpp"
#include "fpimpute/harness.hpp"
#include "fpimpute/imputer.hpp"
#include "fpimpute/missingness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fpimpute {

namespace {

// Model file: a manifest followed by the method payload.
//   "FPIMODEL"  u32 version  string method  u64 seed
//   u32 n_config, then key/value strings
//   u32 n_features, then per feature: string name, u32 kind, u32 n_labels, labels
//   f64 min[K], f64 max[K]
//   generative: f64 fill mean[K], f64 fill median[K], network payload
//   others:     u64 rows, f64 values[rows * K] (masked cells stored as NaN)
constexpr std::array<char, 8> kModelMagic{'F', 'P', 'I', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kModelFormatVersion = 1;

struct SavedModel {
    std::string method;
    std::uint64_t seed = 0;
    Config config;
    std::vector<FeatureSchema> schema;
    MinMaxParams params;
    std::optional<GenerativeImputer> generative;
    FillStatistics stats;
    Matrix train_hidden;  // refit payload of the non-generative methods
};

void write_vector(std::ostream& out, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) nn::io::write_f64(out, v(i));
}

Vector read_vector(std::istream& in, Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = nn::io::read_f64(in);
    return v;
}

void save_model(const std::filesystem::path& path, const SavedModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write(kModelMagic.data(), kModelMagic.size());
    nn::io::write_u32(out, kModelFormatVersion);
    nn::io::write_string(out, m.method);
    nn::io::write_u64(out, m.seed);
    nn::io::write_u32(out, static_cast<std::uint32_t>(m.config.entries().size()));
    for (const auto& [k, v] : m.config.entries()) {
        nn::io::write_string(out, k);
        nn::io::write_string(out, v);
    }
    nn::io::write_u32(out, static_cast<std::uint32_t>(m.schema.size()));
    for (const auto& f : m.schema) {
        nn::io::write_string(out, f.name);
        nn::io::write_u32(out, static_cast<std::uint32_t>(f.kind));
        nn::io::write_u32(out, static_cast<std::uint32_t>(f.labels.size()));
        for (const auto& l : f.labels) nn::io::write_string(out, l);
    }
    write_vector(out, m.params.min);
    write_vector(out, m.params.max);
    if (m.generative) {
        write_vector(out, m.stats.mean);
        write_vector(out, m.stats.median);
        m.generative->write(out);
    } else {
        nn::io::write_u64(out, static_cast<std::uint64_t>(m.train_hidden.rows()));
        for (Eigen::Index i = 0; i < m.train_hidden.rows(); ++i)
            for (Eigen::Index j = 0; j < m.train_hidden.cols(); ++j) nn::io::write_f64(out, m.train_hidden(i, j));
    }
    if (!out) throw DataError("failed writing " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kModelMagic) throw DataError(path.string() + " is not a model file (bad magic)");
    try {
        if (nn::io::read_u32(in) != kModelFormatVersion)
            throw DataError("unsupported model format version");
        SavedModel m;
        m.method = nn::io::read_string(in);
        if (!is_registered_imputer(m.method)) throw DataError("unknown method '" + m.method + "'");
        m.seed = nn::io::read_u64(in);
        const auto n_config = nn::io::read_u32(in);
        for (std::uint32_t i = 0; i < n_config; ++i) {
            auto k = nn::io::read_string(in);
            m.config.set(k, nn::io::read_string(in));
        }
        const auto k = nn::io::read_u32(in);
        if (k == 0 || k > 1'000'000) throw DataError("implausible feature count");
        for (std::uint32_t j = 0; j < k; ++j) {
            FeatureSchema f;
            f.name = nn::io::read_string(in);
            const auto kind = nn::io::read_u32(in);
            if (kind > static_cast<std::uint32_t>(FeatureKind::Ordinal)) throw DataError("bad feature kind");
            f.kind = static_cast<FeatureKind>(kind);
            const auto n_labels = nn::io::read_u32(in);
            if (n_labels > 1'000'000) throw DataError("implausible label count");
            for (std::uint32_t l = 0; l < n_labels; ++l) f.labels.push_back(nn::io::read_string(in));
            m.schema.push_back(std::move(f));
        }
        const auto kk = static_cast<Eigen::Index>(k);
        m.params.min = read_vector(in, kk);
        m.params.max = read_vector(in, kk);
        if (m.method == "generative") {
            m.stats.mean = read_vector(in, kk);
            m.stats.median = read_vector(in, kk);
            m.generative = GenerativeImputer::read(in);
            if (m.generative->feature_count() != static_cast<int>(k))
                throw DataError("network width does not match the feature list");
        } else {
            const auto rows = nn::io::read_u64(in);
            if (rows == 0 || rows > 100'000'000) throw DataError("implausible training row count");
            m.train_hidden.resize(static_cast<Eigen::Index>(rows), kk);
            for (Eigen::Index i = 0; i < m.train_hidden.rows(); ++i)
                for (Eigen::Index j = 0; j < kk; ++j) m.train_hidden(i, j) = nn::io::read_f64(in);
        }
        return m;
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

SchemaSpec schema_spec_of(const std::vector<FeatureSchema>& schema) {
    SchemaSpec spec;
    for (const auto& f : schema) {
        if (f.kind == FeatureKind::Continuous) continue;
        spec.columns[f.name] = SchemaSpec::Entry{f.kind, f.labels};
    }
    return spec;
}

SchemaSpec load_schema(const std::string& path) { return path.empty() ? SchemaSpec{} : SchemaSpec::load(path); }

// Missing cells of `data`: its NA cells plus the cells flagged by the mask file.
MissingMatrix combined_mask(const Dataset& data, const std::string& mask_path) {
    MissingMatrix missing = nan_pattern(data.values);
    if (mask_path.empty()) return missing;
    const LoadedMask lm = read_mask(mask_path);
    if (lm.header != data.header())
        throw ShapeError("mask " + mask_path + " has a different header than the data");
    if (lm.missing.rows() != data.rows())
        throw ShapeError("mask " + mask_path + " has " + std::to_string(lm.missing.rows()) + " rows, data has " +
                         std::to_string(data.rows()));
    return missing || lm.missing;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    return q + "\"";
}

// Continuous columns are written as numbers; coded columns as the label of the
// nearest code so the file parses with the same schema.
void write_labeled_csv(const std::filesystem::path& path, const std::vector<FeatureSchema>& schema,
                       const Matrix& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (std::size_t j = 0; j < schema.size(); ++j) out << (j ? "," : "") << quote(schema[j].name);
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j) out << ',';
            const auto& f = schema[static_cast<std::size_t>(j)];
            const double v = values(i, j);
            if (f.kind == FeatureKind::Continuous || f.labels.empty() || std::isnan(v)) {
                out << format_double(v);
            } else {
                const auto top = static_cast<double>(f.labels.size() - 1);
                const auto code = static_cast<std::size_t>(std::clamp(std::round(v), 0.0, top));
                out << quote(f.labels[code]);
            }
        }
        out << '\n';
    }
    if (!out) throw DataError("failed writing " + path.string());
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const Config& config) {
    if (flag) return *flag;
    const auto v = config.get_int("seed", 0);
    if (v < 0) throw ConfigError("seed must be non-negative");
    return static_cast<std::uint64_t>(v);
}

struct MaskArgs {
    std::string input, schema, out, strategy = "mnar-random";
    double rate = 0.0;
    std::uint64_t seed = 0;
    bool metadata = false;
};

int cmd_mask(const MaskArgs& a, std::ostream& out, std::ostream& err) {
    err << "seed " << a.seed << '\n';
    if (!(a.rate > 0.0 && a.rate < 1.0))
        throw ConfigError("--rate must lie strictly between 0 and 1, got " + format_double(a.rate));
    const auto strategy = parse_mask_strategy(a.strategy);
    const Dataset data = load_csv(a.input, load_schema(a.schema));
    const Mask mask = generate_mask(data, a.rate, strategy, a.seed);
    write_mask_csv(a.out, data.header(), mask.missing);
    if (a.metadata) write_mask_metadata(a.out + ".meta", mask);
    out << "mask " << to_string(strategy) << " target " << format_double(a.rate) << " achieved "
        << format_double(mask.achieved_rate) << " (" << mask.missing_count() << " cells) -> " << a.out << '\n';
    return 0;
}

struct FitArgs {
    std::string input, mask, schema, config, out, method = "generative";
    std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    const Config config = a.config.empty() ? Config{} : Config::load(a.config);
    const std::uint64_t seed = resolve_seed(a.seed, config);
    err << "seed " << seed << '\n';
    if (!is_registered_imputer(a.method)) throw ConfigError("--method: unknown method '" + a.method + "'");

    const Dataset raw = load_csv(a.input, load_schema(a.schema));
    const MissingMatrix missing = combined_mask(raw, a.mask);
    Dataset hidden = raw;
    hidden.values = hide_missing(raw.values, missing);
    const MinMaxParams params = minmax_fit(hidden);
    const Matrix normalized = minmax_normalize(hidden.values, params);

    SavedModel m;
    m.method = a.method;
    m.seed = seed;
    m.config = config;
    m.schema = raw.schema;
    m.params = params;
    auto imputer = make_imputer(a.method, config, seed, raw.schema);
    imputer->fit(normalized, missing);
    if (const auto* g = imputer->generative_model()) {
        m.generative = *g;
        m.stats = *imputer->fill_statistics();
    } else {
        m.train_hidden = normalized;
    }
    save_model(a.out, m);
    out << "fit " << a.method << " on " << raw.rows() << " x " << raw.cols() << " (" << missing.count()
        << " missing cells) -> " << a.out << '\n';
    return 0;
}

struct ImputeArgs {
    std::string model, input, mask, out;
    std::optional<std::uint64_t> seed;
};

int cmd_impute(const ImputeArgs& a, std::ostream& out, std::ostream& err) {
    SavedModel m = load_model(a.model);
    const std::uint64_t seed = a.seed.value_or(m.seed);
    err << "seed " << seed << '\n';
    const Dataset raw = load_csv(a.input, schema_spec_of(m.schema));
    if (raw.header() != [&] {
            std::vector<std::string> h;
            for (const auto& f : m.schema) h.push_back(f.name);
            return h;
        }())
        throw ShapeError(a.input + ": columns differ from the ones the model was fitted on");
    const MissingMatrix missing = combined_mask(raw, a.mask);
    const Matrix normalized = minmax_normalize(hide_missing(raw.values, missing), m.params);

    std::unique_ptr<Imputer> imputer;
    if (m.generative) {
        imputer = restore_generative_imputer(std::move(*m.generative), m.stats, m.config, seed);
    } else {
        imputer = make_imputer(m.method, m.config, seed, m.schema);
        imputer->fit(m.train_hidden, nan_pattern(m.train_hidden));
    }
    const Matrix imputed = minmax_denormalize(imputer->transform(normalized, missing), m.params);
    Matrix result = raw.values;
    for (Eigen::Index j = 0; j < result.cols(); ++j)
        for (Eigen::Index i = 0; i < result.rows(); ++i)
            if (missing(i, j)) result(i, j) = imputed(i, j);
    if (!result.allFinite()) throw NumericError("imputation produced non-finite values");
    write_labeled_csv(a.out, raw.schema, result);
    out << "impute " << m.method << " filled " << missing.count() << " cells -> " << a.out << '\n';
    return 0;
}

struct EvalArgs {
    std::string pred, truth, mask, schema, mode = "all", scale = "minmax";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
    err << "seed none (evaluation is deterministic)\n";
    const RmseMode mode = parse_rmse_mode(a.mode);
    if (a.scale != "minmax" && a.scale != "raw")
        throw ConfigError("--scale must be minmax or raw, got '" + a.scale + "'");
    const SchemaSpec schema = load_schema(a.schema);
    const Dataset truth = load_csv(a.truth, schema);
    const Dataset pred = load_csv(a.pred, schema_spec_of(truth.schema));
    if (pred.header() != truth.header()) throw ShapeError("prediction and truth have different columns");
    if (pred.rows() != truth.rows()) throw ShapeError("prediction and truth have different row counts");
    if (!truth.fully_observed()) throw DataError(a.truth + ": truth must be fully observed");
    if (!pred.fully_observed()) throw DataError(a.pred + ": prediction still has missing cells");
    const LoadedMask lm = read_mask(a.mask);
    if (lm.header != truth.header() || lm.missing.rows() != truth.rows())
        throw ShapeError("mask " + a.mask + " does not match the truth's shape");
    Matrix p = pred.values;
    Matrix t = truth.values;
    if (a.scale == "minmax") {
        const MinMaxParams params = minmax_fit(truth);
        p = minmax_normalize(p, params);
        t = minmax_normalize(t, params);
    }
    const double v = rmse_sum(p, t, lm.missing, mode);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "rmse_sum %.6f", v);
    out << buf << '\n';
    return 0;
}

struct BenchArgs {
    std::string spec, out;
    std::optional<int> jobs;
    bool quiet = false;
};

ExperimentSpec resolve_bench_spec(const BenchArgs& a) {
    ExperimentSpec spec = ExperimentSpec::load(a.spec);
    if (a.jobs) spec.jobs = *a.jobs;
    if (!a.out.empty()) {
        spec.output_dir = a.out;
    } else if (!spec.config.contains("output_dir")) {
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) spec.output_dir = env;
    }
    spec.validate();
    return spec;
}

void print_seeds(std::ostream& err, const ExperimentSpec& spec) {
    err << "seeds";
    for (auto s : spec.seeds) err << ' ' << s;
    err << '\n';
}

ProgressFn progress_printer(std::ostream& err, bool quiet) {
    if (quiet) return {};
    return [&err](const EvaluationReport& r) {
        err << r.dataset << ' ' << r.method << (r.init_policy == "-" ? "" : "/" + r.init_policy) << ' '
            << r.strategy << ' ' << format_double(r.rate) << " seed " << r.seed << ": "
            << (r.ok ? "rmse_sum " + format_double(r.rmse_sum_all) : "failed: " + r.message) << '\n';
    };
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    const ExperimentSpec spec = resolve_bench_spec(a);
    print_seeds(err, spec);
    const auto reports = run(spec, true, progress_printer(err, a.quiet));
    const auto failed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.ok; });
    out << "bench " << reports.size() << " cells, " << failed << " failed -> "
        << (spec.output_dir / "report.csv").string() << '\n';
    return 0;
}

int cmd_init_study(const BenchArgs& a, std::ostream& out, std::ostream& err) {
    const ExperimentSpec spec = resolve_bench_spec(a);
    print_seeds(err, spec);
    const auto reports = init_study(spec, true, progress_printer(err, a.quiet));
    const auto medians = init_policy_medians(reports, RmseMode::All);
    out << "init-study " << reports.size() << " cells ->" << ' ' << (spec.output_dir / "report.md").string();
    for (const auto& [policy, v] : medians) out << ' ' << policy << '=' << format_double(v);
    out << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Missing-value imputation with a probabilistic fixed-point generative model", "fpimpute"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    MaskArgs mask;
    auto* mask_cmd = app.add_subcommand("mask", "Generate an MNAR missingness mask for a complete CSV");
    mask_cmd->add_option("--input", mask.input, "Fully observed data CSV")->required();
    mask_cmd->add_option("--rate", mask.rate, "Target missing rate, strictly between 0 and 1")->required();
    mask_cmd->add_option("--strategy", mask.strategy, "mnar-random (per cell) or mnar-uniform (whole rows)")
        ->capture_default_str();
    mask_cmd->add_option("--seed", mask.seed, "Random seed")->capture_default_str();
    mask_cmd->add_option("--schema", mask.schema, "Optional schema file declaring coded columns");
    mask_cmd->add_option("--out", mask.out, "Output 0/1 mask CSV")->required();
    mask_cmd->add_flag("--metadata", mask.metadata, "Also write <out>.meta with the achieved rate and threshold");

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit an imputation method on masked data and save it");
    fit_cmd->add_option("--input", fit.input, "Training data CSV (NA cells count as missing)")->required();
    fit_cmd->add_option("--mask", fit.mask, "Mask CSV, 0/1 or NA-style; cells flagged here are hidden");
    fit_cmd->add_option("--config", fit.config, "Key-value config file with generative.* / baselines.* keys");
    fit_cmd->add_option("--method", fit.method, "Imputation method: " + [] {
        std::string s;
        for (const auto& n : imputer_names()) s += (s.empty() ? "" : ", ") + n;
        return s;
    }())->capture_default_str();
    fit_cmd->add_option("--seed", fit.seed, "Random seed (default: config key 'seed', else 0)");
    fit_cmd->add_option("--schema", fit.schema, "Optional schema file declaring coded columns");
    fit_cmd->add_option("--out", fit.out, "Output model file")->required();

    ImputeArgs impute;
    auto* impute_cmd = app.add_subcommand("impute", "Fill missing cells with a fitted model");
    impute_cmd->add_option("--model", impute.model, "Model file written by fit")->required();
    impute_cmd->add_option("--input", impute.input, "Data CSV (NA cells count as missing)")->required();
    impute_cmd->add_option("--mask", impute.mask, "Mask CSV, 0/1 or NA-style; cells flagged here are imputed");
    impute_cmd->add_option("--seed", impute.seed, "Random seed (default: the seed stored in the model)");
    impute_cmd->add_option("--out", impute.out, "Output CSV with every missing cell filled")->required();

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score an imputation against the ground truth");
    eval_cmd->add_option("--pred", eval.pred, "Imputed CSV")->required();
    eval_cmd->add_option("--truth", eval.truth, "Complete ground-truth CSV")->required();
    eval_cmd->add_option("--mask", eval.mask, "Mask CSV, 0/1 or NA-style")->required();
    eval_cmd->add_option("--mode", eval.mode, "all (divide by every row) or missing (masked cells only)")
        ->capture_default_str();
    eval_cmd->add_option("--scale", eval.scale, "minmax (truth's column range) or raw")->capture_default_str();
    eval_cmd->add_option("--schema", eval.schema, "Optional schema file declaring coded columns");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run the full experiment grid of a spec file");
    BenchArgs study;
    auto* study_cmd = app.add_subcommand("init-study", "Compare fill policies of the generative method");
    for (auto [cmd, a] : {std::pair{bench_cmd, &bench}, std::pair{study_cmd, &study}}) {
        cmd->add_option("--spec", a->spec, "Experiment spec file")->required();
        cmd->add_option("--jobs", a->jobs, "Worker threads (overrides the spec)")->check(CLI::PositiveNumber);
        cmd->add_option("--out", a->out,
                        std::string("Output directory (default: spec output_dir, then $") + kOutputDirEnv +
                            ", then results)");
        cmd->add_flag("--quiet", a->quiet, "Do not print per-cell progress to stderr");
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*mask_cmd) return cmd_mask(mask, out, err);
        if (*fit_cmd) return cmd_fit(fit, out, err);
        if (*impute_cmd) return cmd_impute(impute, out, err);
        if (*eval_cmd) return cmd_eval(eval, out, err);
        if (*bench_cmd) return cmd_bench(bench, out, err);
        if (*study_cmd) return cmd_init_study(study, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

}  // namespace fpimpute
