#include "fpimpute/missingness.hpp"
#include "fpimpute/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace fpimpute;

namespace {

// Algorithm 1 at a fixed gate t, replaying the documented draw order: two
// distinct anchors, one row uniform per row, then one cell uniform per cell in
// row-major order.
MissingMatrix replay(const Matrix& data, MaskStrategy strategy, std::uint64_t seed, double t) {
    const Eigen::Index n = data.rows(), k = data.cols();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, k - 1);
    const Eigen::Index a1 = pick(rng);
    Eigen::Index a2 = pick(rng);
    while (a2 == a1) a2 = pick(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = unit(rng);
    Matrix cell(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) cell(i, j) = unit(rng);
    MissingMatrix m = MissingMatrix::Constant(n, k, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool eligible = v[static_cast<std::size_t>(i)] < t &&
                              (data(i, a1) < data.col(a1).mean() || data(i, a2) < data.col(a2).mean());
        if (!eligible) continue;
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = strategy == MaskStrategy::MnarUniform || cell(i, j) < t;
    }
    return m;
}

}  // namespace

TEST_CASE("mask hits the target rate and follows the eligibility rule") {
    const Matrix data = synthetic::skewed(500, 1).values;
    for (auto strategy : {MaskStrategy::MnarRandom, MaskStrategy::MnarUniform})
        for (double target : {0.25, 0.5, 0.75})
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const Mask m = generate_mask(data, target, strategy, seed);
                CHECK(std::abs(m.achieved_rate - target) <= 0.005);
                CHECK(m.achieved_rate == static_cast<double>(m.missing.count()) / static_cast<double>(data.size()));
                CHECK(m.anchors[0] != m.anchors[1]);
                CHECK((m.missing == replay(data, strategy, seed, m.threshold)).all());
                const double mean1 = data.col(m.anchors[0]).mean();
                const double mean2 = data.col(m.anchors[1]).mean();
                for (Eigen::Index i = 0; i < data.rows(); ++i) {
                    if (data(i, m.anchors[0]) >= mean1 && data(i, m.anchors[1]) >= mean2)
                        CHECK_FALSE(m.missing.row(i).any());
                    if (strategy == MaskStrategy::MnarUniform)
                        CHECK((m.missing.row(i).all() || !m.missing.row(i).any()));
                }
            }
}

TEST_CASE("mask generation is deterministic") {
    const Matrix data = synthetic::skewed(200, 4).values;
    const Mask a = generate_mask(data, 0.3, MaskStrategy::MnarRandom, 42);
    const Mask b = generate_mask(data, 0.3, MaskStrategy::MnarRandom, 42);
    CHECK((a.missing == b.missing).all());
    CHECK(a.threshold == b.threshold);
    const Mask c = generate_mask(data, 0.3, MaskStrategy::MnarRandom, 43);
    CHECK_FALSE((a.missing == c.missing).all());
}

TEST_CASE("mask preconditions") {
    const Matrix data = synthetic::skewed(100, 2).values;
    CHECK_THROWS_AS(generate_mask(data, 1.5, MaskStrategy::MnarRandom, 0), ConfigError);
    CHECK_THROWS_AS(generate_mask(data, 0.0, MaskStrategy::MnarRandom, 0), ConfigError);
    CHECK_THROWS_AS(generate_mask(Matrix::Ones(10, 2), 0.2, MaskStrategy::MnarRandom, 0), DataError);
    Matrix holes = data;
    holes(3, 3) = kMissing;
    CHECK_THROWS_AS(generate_mask(holes, 0.2, MaskStrategy::MnarRandom, 0), DataError);

    // Only the anchors' below-mean rows can be masked, so 0.99 is out of reach.
    try {
        generate_mask(data, 0.99, MaskStrategy::MnarRandom, 0);
        FAIL("expected GenerationError");
    } catch (const GenerationError& e) {
        CHECK(e.max_achievable() < 0.99);
        CHECK(e.max_achievable() > 0.0);
    }
}

TEST_CASE("apply_mask fill policies") {
    Matrix data(3, 2);
    data << 0.2, 5, 0.4, 6, 9.0, 7;
    MissingMatrix miss = MissingMatrix::Constant(3, 2, false);
    miss(2, 0) = true;
    const Matrix mean = apply_mask(data, miss, InitPolicy::Mean);
    CHECK(mean(2, 0) == doctest::Approx(0.3));
    CHECK(apply_mask(data, miss, InitPolicy::Zero)(2, 0) == 0.0);
    CHECK(apply_mask(data, miss, InitPolicy::Median)(2, 0) == doctest::Approx(0.3));
    const Matrix r1 = apply_mask(data, miss, InitPolicy::Random, 5);
    const Matrix r2 = apply_mask(data, miss, InitPolicy::Random, 5);
    CHECK(r1(2, 0) == r2(2, 0));
    // The masked value 9.0 must never leak into a fill.
    Matrix poisoned = data;
    poisoned(2, 0) = kMissing;
    CHECK(apply_mask(poisoned, miss, InitPolicy::Mean)(2, 0) == mean(2, 0));
}

TEST_CASE("random fills are standard normal") {
    const Matrix data = Matrix::Constant(20000, 1, 3.0);
    MissingMatrix miss = MissingMatrix::Constant(20000, 1, true);
    miss(0, 0) = false;
    const Matrix r = apply_mask(data, miss, InitPolicy::Random, 11);
    const Vector fills = r.col(0).tail(19999);
    const double mean = fills.mean();
    const double var = (fills.array() - mean).square().sum() / (fills.size() - 1);
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("apply_mask preserves observed cells bit-exactly") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const Matrix data = testing::normal_matrix(1 + rng() % 20, 1 + rng() % 6, rng);
        const MissingMatrix miss = testing::random_mask(data.rows(), data.cols(), 0.4, rng);
        for (auto p : {InitPolicy::Mean, InitPolicy::Median, InitPolicy::Zero, InitPolicy::Random}) {
            const Matrix out = apply_mask(data, miss, p, 3);
            CHECK(testing::observed_bit_exact(out, data, miss));
            CHECK(out.allFinite());
        }
    }
}

TEST_CASE("fill statistics use observed cells only") {
    Matrix data(5, 1);
    data << 1, 2, 100, 3, 4;
    MissingMatrix miss = MissingMatrix::Constant(5, 1, false);
    miss(2, 0) = true;
    const auto s = FillStatistics::from_observed(data, miss);
    CHECK(s.mean(0) == doctest::Approx(2.5));
    CHECK(s.median(0) == doctest::Approx(2.5));
    CHECK(median_of({3, 1, 2}) == 2.0);
    CHECK(median_of({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("mask files round trip in both formats") {
    const auto dir = std::filesystem::temp_directory_path() / "fpimpute_mask_test";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(1);
    const MissingMatrix miss = testing::random_mask(6, 3, 0.5, rng);
    write_mask_csv(dir / "m.csv", {"a", "b", "c"}, miss);
    const LoadedMask zero_one = read_mask(dir / "m.csv");
    CHECK(zero_one.header == std::vector<std::string>{"a", "b", "c"});
    CHECK((zero_one.missing == miss).all());

    Matrix data = Matrix::Constant(6, 3, 0.5);
    for (Eigen::Index i = 0; i < miss.size(); ++i)
        if (miss.data()[i]) data.data()[i] = kMissing;
    write_csv(dir / "na.csv", {"a", "b", "c"}, data);
    CHECK((read_mask(dir / "na.csv").missing == miss).all());

    Mask meta;
    meta.missing = miss;
    write_mask_metadata(dir / "m.meta", meta);
    CHECK(std::filesystem::file_size(dir / "m.meta") > 0);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(read_mask(dir / "absent.csv"), DataError);
}
