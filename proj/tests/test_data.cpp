#include "fpimpute/config.hpp"
#include "fpimpute/dataset.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace fpimpute;

namespace {

Dataset parse(const std::string& text, const std::string& schema = "") {
    std::istringstream in(text);
    std::istringstream sch(schema);
    return parse_csv(in, SchemaSpec::parse(sch));
}

Dataset column(std::vector<double> v) {
    Dataset d;
    d.values = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    d.schema = {FeatureSchema{"x", FeatureKind::Continuous, {}}};
    return d;
}

}  // namespace

TEST_CASE("csv loading and label encoding") {
    const Dataset d = parse("a,b\n1,2\n3,4\n");
    CHECK(d.values == (Matrix(2, 2) << 1, 2, 3, 4).finished());
    CHECK(d.header() == std::vector<std::string>{"a", "b"});

    const Dataset yn = parse("x,flag\n1,yes\n2,no\n3,yes\n", "flag = binary\n");
    CHECK(yn.values.col(1) == Vector((Vector(3) << 1, 0, 1).finished()));
    CHECK(yn.schema[1].labels == std::vector<std::string>{"no", "yes"});

    const Dataset lvl = parse("size\nhigh\nlow\nmid\nlow\n", "size = ordinal: low, mid, high\n");
    CHECK(lvl.values.col(0) == Vector((Vector(4) << 2, 0, 1, 0).finished()));

    const Dataset na = parse("a,b\n1,NA\n,4\n");
    CHECK(std::isnan(na.values(0, 1)));
    CHECK(std::isnan(na.values(1, 0)));
    CHECK_FALSE(na.fully_observed());

    const Dataset quoted = parse("\"a,1\",b\n\"5\",6\n");
    CHECK(quoted.schema[0].name == "a,1");
    CHECK(quoted.values(0, 0) == 5.0);
}

TEST_CASE("csv errors carry their location") {
    try {
        parse("a,b\n1,2\n3,oops\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == 2);
    }
    CHECK_THROWS_AS(parse("a,b\n1,2\n3\n"), DataError);
    CHECK_THROWS_AS(parse("f\nx\ny\nz\n", "f = binary\n"), DataError);
    CHECK_THROWS_AS(parse("f\nmaybe\n", "f = categorical: yes, no\n"), ParseError);
    std::istringstream dup("f = categorical: a, b, a\n");
    CHECK_THROWS_AS(SchemaSpec::parse(dup), DataError);
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv write and reload round trip") {
    std::mt19937_64 rng(1);
    Matrix m = testing::normal_matrix(7, 3, rng);
    m(2, 1) = kMissing;
    std::stringstream ss;
    write_csv(ss, {"p", "q", "r"}, m);
    const Dataset back = parse_csv(ss);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (std::isnan(m.data()[i]))
            CHECK(std::isnan(back.values.data()[i]));
        else
            CHECK(back.values.data()[i] == m.data()[i]);
    }
    CHECK(ss.str().find("NA") != std::string::npos);
}

TEST_CASE("min-max normalization") {
    auto [norm, p] = minmax_fit_transform(column({1, 3, 5}));
    CHECK(norm.values.col(0) == Vector((Vector(3) << 0, 0.5, 1).finished()));
    CHECK(minmax_apply(column({6}), p).values(0, 0) == doctest::Approx(1.25));
    CHECK(minmax_fit_transform(column({7, 7})).first.values.isZero(0.0));
    CHECK_THROWS_AS(minmax_fit(column({kMissing, kMissing})), DataError);
    // Missing cells are ignored by the fit and stay missing.
    auto [with_na, q] = minmax_fit_transform(column({2, kMissing, 4}));
    CHECK(q.min(0) == 2.0);
    CHECK(std::isnan(with_na.values(1, 0)));
}

TEST_CASE("normalization round trip and range property") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        Dataset d;
        d.values = testing::normal_matrix(2 + static_cast<Eigen::Index>(rng() % 30), 1 + rng() % 6, rng) * 10.0;
        d.schema.resize(static_cast<std::size_t>(d.cols()));
        auto [norm, p] = minmax_fit_transform(d);
        CHECK(norm.values.minCoeff() >= 0.0);
        CHECK(norm.values.maxCoeff() <= 1.0);
        CHECK((minmax_denormalize(norm.values, p) - d.values).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("split partitions rows deterministically") {
    Dataset d;
    d.values = Matrix::Zero(128, 2);
    d.schema.resize(2);
    const auto s = split(d, 0.18, 5);
    CHECK(s.test.rows() == 23);
    CHECK(s.train.rows() == 105);

    Dataset four;
    four.values = (Matrix(4, 1) << 0, 1, 2, 3).finished();
    four.schema.resize(1);
    const auto h = split(four, 0.5, 1);
    CHECK(h.train_rows.size() == 2);
    CHECK(h.test_rows.size() == 2);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Dataset r;
        const auto n = 2 + static_cast<Eigen::Index>(rng() % 200);
        r.values = testing::normal_matrix(n, 2, rng);
        r.schema.resize(2);
        const double frac = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
        const auto a = split(r, frac, trial);
        const auto b = split(r, frac, trial);
        CHECK(a.train_rows == b.train_rows);
        std::set<Eigen::Index> all(a.train_rows.begin(), a.train_rows.end());
        all.insert(a.test_rows.begin(), a.test_rows.end());
        CHECK(static_cast<Eigen::Index>(all.size()) == n);
        CHECK(a.train_rows.size() + a.test_rows.size() == static_cast<std::size_t>(n));
        CHECK(std::abs(static_cast<double>(a.test_rows.size()) - static_cast<double>(n) * frac) <= 1.0);
        for (std::size_t i = 0; i < a.test_rows.size(); ++i)
            CHECK(a.test.values.row(static_cast<Eigen::Index>(i)) == r.values.row(a.test_rows[i]));
    }
    Dataset one;
    one.values = Matrix::Zero(1, 1);
    one.schema.resize(1);
    CHECK_THROWS_AS(split(one, 0.5, 0), DataError);
    CHECK_THROWS_AS(split(four, 1.0, 0), ConfigError);
}

TEST_CASE("extract_column separates the label") {
    const Dataset d = parse("a,y,b\n1,0,2\n3,1,4\n");
    auto [rest, y] = extract_column(d, "y");
    CHECK(rest.header() == std::vector<std::string>{"a", "b"});
    CHECK(y == Vector((Vector(2) << 0, 1).finished()));
    CHECK_THROWS_AS(extract_column(d, "zz"), DataError);
}

TEST_CASE("config parsing") {
    const Config c = Config::parse_string(
        "seed = 7  # trailing comment\n"
        "methods = [mean, zero]\n"
        "[generative]\n"
        "epochs = 3\n"
        "converge = true\n"
        "[dataset.toy]\n"
        "path = toy.csv\n");
    CHECK(c.get_int("seed", 0) == 7);
    CHECK(c.get_list("methods") == std::vector<std::string>{"mean", "zero"});
    CHECK(c.get_int("generative.epochs", 0) == 3);
    CHECK(c.get_bool("generative.converge", false));
    CHECK(c.subtree("generative").get_int("epochs", 0) == 3);
    CHECK(c.children("dataset") == std::set<std::string>{"toy"});
    CHECK(c.get_double("missing", 1.5) == 1.5);
    CHECK_THROWS_AS(Config::parse_string("epochs = ten\n").get_int("epochs", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("just words\n"), ConfigError);
    CHECK_THROWS_AS(Config::load("/nonexistent/config"), ConfigError);
}
