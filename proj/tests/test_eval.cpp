#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "gsi/errors.hpp"
#include "gsi/eval.hpp"
#include "support.hpp"

using namespace gsi;
using gsi::test::Gen;

namespace {

struct Counts {
    std::size_t tp = 0, relevant = 0;
};

// Enumerates the top-k by repeated arg-max, an independent route to the same set.
Counts oracle_counts(const std::vector<double>& ref, const std::vector<double>& pred, std::size_t k, double tau,
                     std::vector<std::size_t> cand) {
    Counts c;
    for (double r : ref)
        if (r >= tau) ++c.relevant;
    for (std::size_t pick = 0; pick < k; ++pick) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < cand.size(); ++t) {
            const auto a = cand[t], b = cand[best];
            if (pred[a] > pred[b] || (pred[a] == pred[b] && a < b)) best = t;
        }
        if (ref[cand[best]] >= tau) ++c.tp;
        cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return c;
}

std::vector<double> ratings(Gen& gen, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(gen.range(1, 5));
    return v;
}

} // namespace

TEST(Mse, Examples) {
    const Matrix truth{{1, 2}, {3, 4}};
    const SplitMask split{ObservedSet::from_entries(2, 2, {{0, 0}, {1, 1}}),
                          ObservedSet::from_entries(2, 2, {{0, 1}}), 0, 0.5};
    const auto same = train_test_error(truth, truth, split);
    EXPECT_EQ(same.train_mse, 0.0);
    EXPECT_EQ(same.test_mse, 0.0);
    const auto shifted = train_test_error(truth, truth + Matrix(2, 2, 1.0), split);
    EXPECT_DOUBLE_EQ(shifted.train_mse, 1.0);
    EXPECT_DOUBLE_EQ(*shifted.test_mse, 1.0);
    EXPECT_EQ(same.rank, 2u);
    EXPECT_NEAR(same.nuclear_norm, test::oracle_nuclear_norm(truth), 1e-9);
}

TEST(Mse, EmptyTestSetIsAbsent) {
    const SplitMask split{ObservedSet::all(2, 2), ObservedSet(2, 2), 0, 0.5};
    EXPECT_FALSE(train_test_error(Matrix(2, 2), Matrix(2, 2), split).test_mse.has_value());
    const SplitMask none{ObservedSet(2, 2), ObservedSet::all(2, 2), 0, 0.5};
    EXPECT_THROW(train_test_error(Matrix(2, 2), Matrix(2, 2), none), ConfigError);
    EXPECT_THROW(train_test_error(Matrix(2, 2), Matrix(3, 2), split), ConfigError);
}

TEST(Mse, BruteForceAndDecomposition) {
    Gen gen(71);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = gen.range(2, 10), n = gen.range(2, 10);
        const Matrix truth = gen.ratings(m, n), z = gen.matrix(m, n, 3.0);
        ObservedSet omega = gen.mask(m, n, 0.7);
        omega.insert(0, 0);
        omega.insert(m - 1, n - 1);
        const auto split = train_test_split(omega, 0.5, trial);
        const auto r = train_test_error(truth, z, split);
        double tr = 0, te = 0;
        for (const auto& e : split.train.entries()) tr += std::pow(truth(e.row, e.col) - z(e.row, e.col), 2);
        for (const auto& e : split.test.entries()) te += std::pow(truth(e.row, e.col) - z(e.row, e.col), 2);
        EXPECT_NEAR(r.train_mse, tr / split.train.count(), 1e-12);
        EXPECT_NEAR(*r.test_mse, te / split.test.count(), 1e-12);
        EXPECT_NEAR(split.train.count() * r.train_mse + split.test.count() * *r.test_mse, tr + te, 1e-9);
    }
}

TEST(Reference, Examples) {
    const Matrix truth{{2, 4}, {4, 2}, {1, 1}};
    EXPECT_EQ(group_reference(truth, Group{"g", {0, 1}}), (std::vector<double>{3, 3}));
    EXPECT_EQ(group_reference(truth, Group{"s", {2}}), (std::vector<double>{1, 1}));
    EXPECT_EQ(group_prediction_aggregate(truth, Group{"g", {0, 1}}), (std::vector<double>{3, 3}));
    EXPECT_EQ(group_prediction_aggregate(truth, Group{"s", {0}}), (std::vector<double>{2, 4}));
}

TEST(Reference, BruteForceAndPermutationInvariance) {
    Gen gen(72);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t m = gen.range(2, 10), n = gen.range(1, 8);
        const Matrix truth = gen.ratings(m, n);
        Group g{"g", gen.subset(m, gen.range(1, m))};
        const auto ref = group_reference(truth, g);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (auto i : g.members) s += truth(i, j);
            EXPECT_NEAR(ref[j], s / g.size(), 1e-12);
        }
        std::reverse(g.members.begin(), g.members.end());
        const auto rev = group_reference(truth, g);
        for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(rev[j], ref[j], 1e-12);
    }
}

TEST(Metrics, HandEnumeratedExample) {
    const std::vector<double> ref{5, 1, 4, 2, 5, 3};
    const std::vector<double> pred{4.9, 1.2, 2.0, 4.5, 4.8, 3.1};
    const auto m = precision_recall_f1(ref, pred, 3, 3.5);
    EXPECT_EQ(m.tp, 2u);
    EXPECT_EQ(m.fp, 1u);
    EXPECT_EQ(m.fn, 1u);
    EXPECT_EQ(m.precision, 2.0 / 3.0);
    EXPECT_EQ(*m.recall, 2.0 / 3.0);
    EXPECT_EQ(m.f1, 2.0 / 3.0);
}

TEST(Metrics, PerfectRankingAndEmptyRelevantSet) {
    const std::vector<double> ref{5, 4, 1, 2, 5};
    for (std::size_t k = 1; k <= 5; ++k) {
        const auto m = precision_recall_f1(ref, ref, k, 3.5);
        EXPECT_DOUBLE_EQ(m.precision, std::min<double>(k, 3) / k);
        EXPECT_DOUBLE_EQ(*m.recall, std::min<double>(k, 3) / 3);
    }
    const std::vector<double> low{1, 2, 3};
    const auto m = precision_recall_f1(low, low, 2, 3.5);
    EXPECT_FALSE(m.recall.has_value());
    EXPECT_EQ(m.precision, 0.0);
    EXPECT_EQ(m.f1, 0.0);
}

TEST(Metrics, TiesBreakByLowerIndex) {
    const std::vector<double> ref{1, 5, 5};
    const std::vector<double> pred{3, 3, 3};
    const auto m = precision_recall_f1(ref, pred, 1, 3.5);
    EXPECT_EQ(m.tp, 0u); // item 0 wins the tie
}

TEST(Metrics, RelevantOutsideCandidatesCountAsMisses) {
    const std::vector<double> ref{5, 5, 1, 4};
    const std::vector<double> pred{5, 5, 1, 4};
    const std::vector<std::size_t> cand{1, 2, 3};
    const auto m = precision_recall_f1(ref, pred, 2, 3.5, cand);
    EXPECT_EQ(m.tp, 2u);
    EXPECT_EQ(m.fn, 1u);
    EXPECT_DOUBLE_EQ(*m.recall, 2.0 / 3.0);
}

TEST(Metrics, RejectsBadArguments) {
    const std::vector<double> v{1, 2, 3};
    EXPECT_THROW(precision_recall_f1(v, v, 4, 3.5), ConfigError);
    EXPECT_THROW(precision_recall_f1(v, v, 1, 3.5, std::vector<std::size_t>{}), ConfigError);
    EXPECT_THROW(precision_recall_f1(v, std::vector<double>{1, 2}, 1, 3.5), ConfigError);
    EXPECT_THROW(precision_recall_f1(v, v, 1, 3.5, std::vector<std::size_t>{7}), ConfigError);
}

TEST(MetricsProperty, MatchesOracleBoundsAndMonotoneInvariance) {
    Gen gen(73);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = gen.range(1, 30);
        const auto ref = ratings(gen, n);
        std::vector<double> pred(n);
        for (auto& p : pred) p = gen.coin(0.3) ? static_cast<double>(gen.range(1, 5)) : gen.uniform(0, 6);
        const auto cand = gen.subset(n, gen.range(1, n));
        const std::size_t k = gen.range(1, cand.size());
        const double tau = gen.uniform(1, 5);
        const auto m = precision_recall_f1(ref, pred, k, tau, cand);
        const auto o = oracle_counts(ref, pred, k, tau, cand);

        ASSERT_EQ(m.tp, o.tp) << "trial " << trial;
        EXPECT_EQ(m.tp + m.fp, k);
        EXPECT_EQ(m.fn, o.relevant - o.tp);
        EXPECT_GE(m.precision, 0.0);
        EXPECT_LE(m.precision, 1.0);
        EXPECT_GE(m.f1, 0.0);
        EXPECT_LE(m.f1, 1.0);
        EXPECT_EQ(m.recall.has_value(), o.relevant > 0);
        if (m.recall) {
            EXPECT_GE(*m.recall, 0.0);
            EXPECT_LE(*m.recall, 1.0);
            EXPECT_LE(m.f1, std::min(2 * m.precision, 2 * *m.recall) + 1e-15);
        }
        EXPECT_EQ(m.f1 == 0.0, m.tp == 0);

        // Strictly increasing transforms keep the order, hence the metrics.
        std::vector<double> t1(n), t2(n);
        for (std::size_t j = 0; j < n; ++j) {
            t1[j] = std::exp(pred[j]);
            t2[j] = 3.0 * pred[j] * pred[j] * pred[j] - 7.0;
        }
        for (const auto& t : {t1, t2}) {
            const auto mt = precision_recall_f1(ref, t, k, tau, cand);
            EXPECT_EQ(mt.tp, m.tp);
            EXPECT_EQ(mt.precision, m.precision);
            EXPECT_EQ(mt.recall, m.recall);
            EXPECT_EQ(mt.f1, m.f1);
        }
    }
}

TEST(Candidates, ExcludeJointlyObservedItems) {
    ObservedSet train(3, 4);
    train.insert(0, 0);
    train.insert(1, 0);
    train.insert(0, 1);
    train.insert(2, 2);
    const Group g{"g", {0, 1}};
    EXPECT_EQ(candidate_items(train, g, CandidateMode::exclude_jointly_observed),
              (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(candidate_items(train, g, CandidateMode::all_items), (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(ErrorCurve, ShapeOnSyntheticPath) {
    SyntheticConfig sc;
    sc.rows = 60;
    sc.cols = 30;
    sc.observed_fraction = 0.5;
    const auto d = generate_synthetic(sc);
    const auto split = train_test_split(d.observed.observed(), 0.75, 1);
    const RatingMatrix train(d.full, split.train);
    SoftImputeConfig c;
    c.grid_size = 8;
    c.lambda_min = 0.5;
    const auto path = soft_impute_path(train, c);
    const auto curve = error_curve(path, d.full, split);
    ASSERT_EQ(curve.size(), 8u);
    for (std::size_t k = 1; k < curve.size(); ++k) {
        EXPECT_GT(curve[k].nuclear_norm, curve[k - 1].nuclear_norm);
        EXPECT_LE(curve[k].train_mse, curve[k - 1].train_mse + 1e-9);
        EXPECT_LT(curve[k].lambda, curve[k - 1].lambda);
    }
    const std::vector<double> one{c.lambda_min};
    EXPECT_EQ(error_curve(soft_impute_path(train, one, c), d.full, split).size(), 1u);
}

TEST(ConvergenceSeries, Examples) {
    ConvergenceTrace t;
    t.relative_errors = {1e-1, 1e-2, 0.0, 1e-3};
    const auto s = convergence_series(t);
    ASSERT_EQ(s.points.size(), 3u);
    EXPECT_EQ(s.points[0].first, 0u);
    EXPECT_NEAR(s.points[0].second, -1.0, 1e-14);
    EXPECT_EQ(s.points[2].first, 3u);
    EXPECT_NEAR(s.points[2].second, -3.0, 1e-14);
    EXPECT_EQ(s.zero_errors, 1u);
}

TEST(ConvergenceSeries, ConvergedRunEndsBelowEpsilonWithNegativeSlope) {
    SyntheticConfig sc;
    sc.rows = 80;
    sc.cols = 40;
    const auto d = generate_synthetic(sc);
    SoftImputeConfig c;
    c.epsilon = 1e-6;
    const auto r = soft_impute(d.observed, 5.0, project_observed(d.observed), c);
    ASSERT_TRUE(r.trace.converged);
    const auto s = convergence_series(r.trace);
    EXPECT_LT(s.points.back().second, std::log10(c.epsilon));
    std::vector<double> xs, ys;
    for (const auto& [k, v] : s.points) {
        xs.push_back(static_cast<double>(k));
        ys.push_back(v);
    }
    EXPECT_LT(fit_line(xs, ys).slope, 0.0);
}

TEST(Method, Names) {
    for (auto m : {Method::gsi, Method::wbf, Method::af}) EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_THROW(parse_method("svd"), ConfigError);
}

TEST(RankExperiment, GsiRanksNonIncreasingAndZeroAboveSigmaMax) {
    SyntheticConfig sc;
    sc.rows = 40;
    sc.cols = 20;
    sc.observed_fraction = 0.5;
    const auto d = generate_synthetic(sc);
    const double smax = test::gram_singular_values(project_observed(d.observed)).front();
    const std::vector<RankDataset> ds{{"syn", d.observed, Group{"g", {0, 1, 2}}}};
    const std::vector<Method> methods{Method::gsi, Method::af};
    const std::vector<double> lambdas{0.01, 1.0, 10.0, 2 * smax};
    RankExperimentConfig c;
    c.als.rank = 5;
    const auto table = rank_recovery_experiment(ds, methods, lambdas, c);
    std::vector<std::size_t> gsi;
    for (const auto& cell : table.cells) {
        ASSERT_TRUE(cell.rank.has_value());
        EXPECT_LE(*cell.rank, 20u);
        if (cell.method == Method::gsi) gsi.push_back(*cell.rank);
        if (cell.method == Method::af) {
            EXPECT_EQ(cell.factor_rank, 5u);
            EXPECT_LE(*cell.rank, 5u);
        }
    }
    ASSERT_EQ(gsi.size(), 4u);
    for (std::size_t k = 1; k < gsi.size(); ++k) EXPECT_LE(gsi[k], gsi[k - 1]);
    EXPECT_EQ(gsi.back(), 0u);
}
