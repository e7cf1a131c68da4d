#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "gsi/data.hpp"
#include "gsi/errors.hpp"
#include "support.hpp"

using namespace gsi;
using gsi::test::Gen;

namespace {

RatingsTable parse_text(const std::string& text, const CsvSchema& schema = CsvSchema::movielens_100k()) {
    std::istringstream in(text);
    return parse_ratings(in, schema);
}

} // namespace

TEST(Parse, MovieLensLines) {
    const auto t = parse_text("196\t242\t3\t881250949\n186\t302\t3\t891717742\n\n22\t377\t1\t878887116\n");
    ASSERT_EQ(t.records.size(), 3u);
    EXPECT_EQ(t.records[0].user_id, 196);
    EXPECT_EQ(t.records[0].item_id, 242);
    EXPECT_EQ(t.records[0].rating, 3.0);
    EXPECT_EQ(t.records[0].timestamp, 881250949);
    EXPECT_EQ(t.users, (std::vector<std::int64_t>{22, 186, 196}));
    EXPECT_EQ(t.items, (std::vector<std::int64_t>{242, 302, 377}));
    EXPECT_EQ(t.malformed, 0u);
}

TEST(Parse, GoodbooksHeaderAndCommas) {
    const auto t = parse_text("user_id,book_id,rating\n1,258,5\n2,4081,4\n", CsvSchema::goodbooks());
    ASSERT_EQ(t.records.size(), 2u);
    EXPECT_EQ(t.records[1].item_id, 4081);
    EXPECT_FALSE(t.records[1].timestamp.has_value());
}

TEST(Parse, RejectsOutOfScaleAndCountsMalformed) {
    const auto t = parse_text("1\t1\t7\t0\n1\t2\tx\t0\n1\t3\n1\t4\t0\t0\n1\t5\t4\t0\n");
    EXPECT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.rejected, 2u);
    EXPECT_EQ(t.malformed, 2u);
}

TEST(Parse, DuplicatesKeepTheLast) {
    const auto t = parse_text("1\t1\t2\t0\n1\t1\t5\t1\n");
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].rating, 5.0);
    EXPECT_EQ(t.duplicates, 1u);
}

TEST(Parse, EmptyInput) {
    const auto t = parse_text("");
    EXPECT_TRUE(t.records.empty());
    EXPECT_THROW(subsample(t, 10, 10), DataError);
}

TEST(Parse, MissingFileIsDataError) {
    EXPECT_THROW(load_ratings_csv("/nonexistent/ratings.csv", CsvSchema::goodbooks()), DataError);
}

TEST(Parse, LoadsFromDisk) {
    const auto path = std::filesystem::temp_directory_path() / "gsi_test_ratings.csv";
    {
        std::ofstream out(path);
        out << "user_id,book_id,rating\n3,10,4\n";
    }
    const auto t = load_ratings_csv(path, CsvSchema::goodbooks());
    std::filesystem::remove(path);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].user_id, 3);
}

TEST(Schema, Validation) {
    CsvSchema s;
    s.min_rating = 0;
    EXPECT_THROW(s.validate(), ConfigError);
    s = CsvSchema{};
    s.item_col = 0;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Subsample, KeepsMostActiveWithIdTies) {
    // Users 1 and 2 have 3 ratings, user 3 has 1. Items 10 and 20 tie with 3.
    const auto t = parse_text(
        "1\t10\t4\t0\n1\t20\t3\t0\n1\t30\t5\t0\n"
        "2\t10\t2\t0\n2\t20\t1\t0\n2\t40\t5\t0\n"
        "3\t20\t4\t0\n");
    const auto s = subsample(t, 2, 2);
    EXPECT_EQ(s.user_ids, (std::vector<std::int64_t>{1, 2}));
    EXPECT_EQ(s.item_ids, (std::vector<std::int64_t>{10, 20}));
    EXPECT_EQ(s.matrix.values(), (Matrix{{4, 3}, {2, 1}}));
    EXPECT_EQ(s.sparsity, 0.0);
    EXPECT_TRUE(s.warnings.empty());
}

TEST(Subsample, ClampsWithWarning) {
    const auto t = parse_text("1\t10\t4\t0\n2\t20\t3\t0\n");
    const auto s = subsample(t, 5, 1);
    EXPECT_EQ(s.matrix.rows(), 2u);
    EXPECT_EQ(s.matrix.cols(), 1u);
    EXPECT_EQ(s.item_ids, (std::vector<std::int64_t>{10}));
    EXPECT_EQ(s.warnings.size(), 1u);
    EXPECT_DOUBLE_EQ(s.sparsity, 0.5);
}

TEST(Knn, SmallExample) {
    // Users 0 and 1 agree on item 0; user 2 is far away.
    ObservedSet o(3, 2);
    o.insert(0, 0);
    o.insert(1, 0);
    o.insert(1, 1);
    o.insert(2, 0);
    o.insert(2, 1);
    const RatingMatrix x(Matrix{{4, 0}, {4, 2}, {1, 5}}, o);
    const Matrix k1 = knn_impute(x, 1);
    EXPECT_EQ(k1(0, 1), 2.0);
    const Matrix k2 = knn_impute(x, 2);
    EXPECT_EQ(k2(0, 1), 3.5);
    for (const auto& e : o.entries()) EXPECT_EQ(k2(e.row, e.col), x(e.row, e.col));
}

TEST(Knn, FallbacksToItemAndGlobalMean) {
    // User 0 shares no items with anybody; item 2 is rated by nobody.
    ObservedSet o(3, 3);
    o.insert(0, 0);
    o.insert(1, 1);
    o.insert(2, 1);
    const RatingMatrix x(Matrix{{5, 0, 0}, {0, 2, 0}, {0, 4, 0}}, o);
    const Matrix k = knn_impute(x, 2);
    EXPECT_EQ(k(0, 1), 3.0);           // item mean
    EXPECT_NEAR(k(0, 2), 11.0 / 3, 1e-12); // global mean
    EXPECT_THROW(knn_impute(RatingMatrix(Matrix(2, 2), ObservedSet(2, 2)), 1), DegenerateInputError);
    EXPECT_THROW(knn_impute(x, 0), ConfigError);
}

TEST(Knn, MatchesBruteForceOracle) {
    Gen gen(61);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t m = gen.range(2, 12), n = gen.range(1, 8);
        ObservedSet o = gen.mask(m, n, gen.uniform(0.2, 0.9));
        if (o.count() == 0) o.insert(0, 0);
        const RatingMatrix x(gen.ratings(m, n), o);
        const std::size_t k = gen.range(1, 4);
        EXPECT_LT(test::max_abs_diff(knn_impute(x, k), test::brute_knn(x, k)), 1e-12) << "trial " << trial;
    }
    ObservedSet o(5, 4);
    const Matrix v{{5, 3, 0, 1}, {4, 0, 0, 1}, {1, 1, 0, 5}, {1, 0, 0, 4}, {0, 1, 5, 4}};
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (v(i, j) != 0) o.insert(i, j);
    const RatingMatrix x(v, o);
    EXPECT_EQ(knn_impute(x, 2), test::brute_knn(x, 2));
}

TEST(Split, PartitionsOmegaWithRoundedTrainSize) {
    Gen gen(62);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = gen.range(1, 20), n = gen.range(1, 20);
        const ObservedSet omega = gen.mask(m, n, gen.uniform());
        const double f = gen.uniform(0.05, 0.95);
        const auto s = train_test_split(omega, f, trial);
        EXPECT_EQ(s.train.count(), static_cast<std::size_t>(std::llround(f * omega.count())));
        EXPECT_EQ(s.train.count() + s.test.count(), omega.count());
        for (const auto& e : s.train.entries()) {
            EXPECT_TRUE(omega.contains(e.row, e.col));
            EXPECT_FALSE(s.test.contains(e.row, e.col));
        }
        for (const auto& e : s.test.entries()) EXPECT_TRUE(omega.contains(e.row, e.col));
    }
}

TEST(Split, Examples) {
    const auto s = train_test_split(ObservedSet::all(4, 5), 0.75, 3);
    EXPECT_EQ(s.train.count(), 15u);
    EXPECT_EQ(s.test.count(), 5u);
    EXPECT_EQ(s.train, train_test_split(ObservedSet::all(4, 5), 0.75, 3).train);
    EXPECT_NE(s.train, train_test_split(ObservedSet::all(4, 5), 0.75, 4).train);
    EXPECT_THROW(train_test_split(ObservedSet::all(2, 2), 1.0, 0), ConfigError);
    EXPECT_THROW(train_test_split(ObservedSet::all(2, 2), 0.0, 0), ConfigError);
}

TEST(Synthetic, Statistics) {
    SyntheticConfig c;
    c.rows = 400;
    c.cols = 100;
    const auto d = generate_synthetic(c);
    double sum = 0, ss = 0;
    double lo = 10, hi = 0;
    for (double v : d.full.values()) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double mean = sum / d.full.size();
    for (double v : d.full.values()) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 3.5, 0.02);
    EXPECT_NEAR(std::sqrt(ss / d.full.size()), 0.65, 0.02);
    EXPECT_GE(lo, 1.0);
    EXPECT_LE(hi, 5.0);
    EXPECT_NEAR(double(d.observed.observed().count()) / d.full.size(), 0.25, 0.01);
    for (const auto& e : d.observed.observed().entries()) EXPECT_EQ(d.observed(e.row, e.col), d.full(e.row, e.col));
    EXPECT_EQ(generate_synthetic(c).full, d.full);
}

TEST(Synthetic, Validation) {
    SyntheticConfig c;
    c.observed_fraction = 0;
    EXPECT_THROW(generate_synthetic(c), ConfigError);
    c = SyntheticConfig{};
    c.rows = 0;
    EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(Snapshot, FormatAndRoundTrip) {
    ObservedSet o(2, 3);
    o.insert(0, 2);
    o.insert(1, 0);
    const RatingMatrix x(Matrix{{0, 0, 3.25}, {4.5, 0, 0}}, o);
    std::ostringstream out;
    write_snapshot(out, x);
    EXPECT_EQ(out.str(), "GSI-MATRIX v1 2 3 2\n0 2 3.25\n1 0 4.5\n");
    std::istringstream in(out.str());
    EXPECT_EQ(read_snapshot(in), x);
    std::istringstream bad("GSI-MATRIX v1 2 2 3\n0 0 1\n");
    EXPECT_THROW(read_snapshot(bad), DataError);
    std::istringstream junk("hello");
    EXPECT_THROW(read_snapshot(junk), DataError);
}
