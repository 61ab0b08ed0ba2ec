#include "fpimpute/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fpimpute {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_missing_token(const std::string& field) { return field.empty() || field == "NA"; }

std::optional<double> parse_number(const std::string& field) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

}  // namespace

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::Continuous: return "continuous";
        case FeatureKind::Binary: return "binary";
        case FeatureKind::Categorical: return "categorical";
        case FeatureKind::Ordinal: return "ordinal";
    }
    return "continuous";
}

FeatureKind parse_feature_kind(const std::string& text) {
    if (text == "continuous") return FeatureKind::Continuous;
    if (text == "binary") return FeatureKind::Binary;
    if (text == "categorical") return FeatureKind::Categorical;
    if (text == "ordinal") return FeatureKind::Ordinal;
    throw DataError("unknown feature kind '" + text + "'");
}

SchemaSpec SchemaSpec::parse(std::istream& in) {
    SchemaSpec spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("schema line lacks '='", lineno, 0);
        const auto name = trim(std::string_view(t).substr(0, eq));
        auto rhs = trim(std::string_view(t).substr(eq + 1));
        Entry entry;
        const auto colon = rhs.find(':');
        entry.kind = parse_feature_kind(trim(std::string_view(rhs).substr(0, colon)));
        if (colon != std::string::npos) entry.label_order = split_list(rhs.substr(colon + 1));
        std::set<std::string> seen(entry.label_order.begin(), entry.label_order.end());
        if (seen.size() != entry.label_order.size())
            throw DataError("schema for '" + name + "' lists a label twice");
        if (entry.kind == FeatureKind::Binary && entry.label_order.size() > 2)
            throw DataError("binary feature '" + name + "' declares more than two labels");
        spec.columns[name] = std::move(entry);
    }
    return spec;
}

SchemaSpec SchemaSpec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file " + path.string());
    return parse(in);
}

std::vector<std::string> Dataset::header() const {
    std::vector<std::string> h;
    h.reserve(schema.size());
    for (const auto& f : schema) h.push_back(f.name);
    return h;
}

std::optional<Eigen::Index> Dataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == name) return static_cast<Eigen::Index>(i);
    return std::nullopt;
}

std::vector<std::vector<std::string>> read_csv_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    char c = 0;
    auto end_field = [&] {
        record.push_back(trim(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_record();
        } else if (c != '\r') {
            field.push_back(c);
            if (c != ' ' && c != '\t') field_started = true;
        }
    }
    if (in_quotes) throw DataError("CSV ends inside a quoted field");
    if (!field.empty() || !record.empty()) end_record();
    return records;
}

Dataset parse_csv(std::istream& in, const SchemaSpec& spec) {
    auto records = read_csv_records(in);
    if (records.empty()) throw DataError("CSV has no header row");
    const auto& header = records.front();
    const std::size_t k = header.size();
    const std::size_t n = records.size() - 1;
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].size() != k)
            throw DataError("ragged CSV: line " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                            " fields, header has " + std::to_string(k));

    Dataset data;
    data.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    data.schema.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        auto& fs = data.schema[j];
        fs.name = header[j];
        const auto it = spec.columns.find(fs.name);
        if (it != spec.columns.end()) {
            fs.kind = it->second.kind;
            fs.labels = it->second.label_order;
        }
        if (fs.kind == FeatureKind::Continuous) {
            for (std::size_t r = 0; r < n; ++r) {
                const auto& field = records[r + 1][j];
                double v = kMissing;
                if (!is_missing_token(field)) {
                    auto parsed = parse_number(field);
                    if (!parsed) throw ParseError("cannot parse '" + field + "' as a number in column '" + fs.name + "'", r + 2, j + 1);
                    v = *parsed;
                }
                data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
            }
            continue;
        }
        if (fs.labels.empty()) {
            std::set<std::string> discovered;
            for (std::size_t r = 0; r < n; ++r)
                if (!is_missing_token(records[r + 1][j])) discovered.insert(records[r + 1][j]);
            fs.labels.assign(discovered.begin(), discovered.end());
        }
        if (fs.kind == FeatureKind::Binary && fs.labels.size() > 2)
            throw DataError("binary column '" + fs.name + "' has " + std::to_string(fs.labels.size()) + " labels");
        for (std::size_t r = 0; r < n; ++r) {
            const auto& field = records[r + 1][j];
            double v = kMissing;
            if (!is_missing_token(field)) {
                const auto pos = std::find(fs.labels.begin(), fs.labels.end(), field);
                if (pos == fs.labels.end())
                    throw ParseError("label '" + field + "' is not declared for column '" + fs.name + "'", r + 2, j + 1);
                v = static_cast<double>(pos - fs.labels.begin());
            }
            data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const SchemaSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return parse_csv(in, spec);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.row(), e.column());
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw NumericError("cannot format value");
    return std::string(buf, ptr);
}

namespace {
std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q.push_back('"');
        q.push_back(c);
    }
    q.push_back('"');
    return q;
}
}  // namespace

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& values) {
    require_shape(static_cast<Eigen::Index>(header.size()) == values.cols(), "header width does not match matrix");
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << quote_if_needed(header[j]);
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    write_csv(out, header, values);
}

std::pair<Dataset, Vector> extract_column(const Dataset& data, const std::string& name) {
    const auto idx = data.column_index(name);
    if (!idx) throw DataError("column '" + name + "' not found");
    Dataset rest;
    rest.split_tag = data.split_tag;
    rest.values.resize(data.rows(), data.cols() - 1);
    Eigen::Index out = 0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        if (j == *idx) continue;
        rest.values.col(out++) = data.values.col(j);
        rest.schema.push_back(data.schema[static_cast<std::size_t>(j)]);
    }
    if (data.normalization) {
        MinMaxParams p;
        p.min.resize(rest.cols());
        p.max.resize(rest.cols());
        out = 0;
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (j == *idx) continue;
            p.min(out) = data.normalization->min(j);
            p.max(out++) = data.normalization->max(j);
        }
        rest.normalization = p;
    }
    return {std::move(rest), data.values.col(*idx)};
}

MinMaxParams minmax_fit(const Dataset& train) {
    MinMaxParams p;
    p.min.resize(train.cols());
    p.max.resize(train.cols());
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (Eigen::Index i = 0; i < train.rows(); ++i) {
            const double v = train.values(i, j);
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (lo > hi)
            throw DataError("cannot normalize feature '" + train.schema[static_cast<std::size_t>(j)].name +
                            "': no observed training values");
        p.min(j) = lo;
        p.max(j) = hi;
    }
    return p;
}

Matrix minmax_normalize(const Matrix& values, const MinMaxParams& params) {
    require_shape(values.cols() == params.size(), "normalization parameters do not match feature count");
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double range = params.max(j) - params.min(j);
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            const double v = values(i, j);
            if (std::isnan(v))
                out(i, j) = v;
            else
                out(i, j) = range > 0.0 ? (v - params.min(j)) / range : 0.0;
        }
    }
    return out;
}

Matrix minmax_denormalize(const Matrix& values, const MinMaxParams& params) {
    require_shape(values.cols() == params.size(), "normalization parameters do not match feature count");
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double range = params.max(j) - params.min(j);
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            out(i, j) = range > 0.0 ? values(i, j) * range + params.min(j) : params.min(j);
    }
    return out;
}

Dataset minmax_apply(const Dataset& data, const MinMaxParams& params) {
    Dataset out = data;
    out.values = minmax_normalize(data.values, params);
    out.normalization = params;
    return out;
}

std::pair<Dataset, MinMaxParams> minmax_fit_transform(const Dataset& train) {
    auto params = minmax_fit(train);
    return {minmax_apply(train, params), params};
}

Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

MissingMatrix select_rows(const MissingMatrix& m, const std::vector<Eigen::Index>& rows) {
    MissingMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

SplitResult split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must lie strictly between 0 and 1");
    const Eigen::Index n = data.rows();
    if (n < 2) throw DataError("cannot split a dataset with fewer than 2 rows");
    auto n_test = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * test_fraction));
    n_test = std::clamp<Eigen::Index>(n_test, 1, n - 1);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SplitResult r;
    r.test_rows.assign(order.begin(), order.begin() + n_test);
    r.train_rows.assign(order.begin() + n_test, order.end());
    std::sort(r.test_rows.begin(), r.test_rows.end());
    std::sort(r.train_rows.begin(), r.train_rows.end());

    r.train.schema = r.test.schema = data.schema;
    r.train.normalization = r.test.normalization = data.normalization;
    r.train.values = select_rows(data.values, r.train_rows);
    r.test.values = select_rows(data.values, r.test_rows);
    r.train.split_tag = SplitTag::Train;
    r.test.split_tag = SplitTag::Test;
    return r;
}

}  // namespace fpimpute
