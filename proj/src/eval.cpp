#include "gsi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gsi/errors.hpp"

namespace gsi {

namespace {

double masked_mse(const Matrix& truth, const Matrix& z, const ObservedSet& mask) {
    double s = 0.0;
    for (const auto& e : mask.entries()) {
        const double d = truth(e.row, e.col) - z(e.row, e.col);
        s += d * d;
    }
    return s / static_cast<double>(mask.count());
}

void check_shapes(const Matrix& truth, const Matrix& z, const SplitMask& split) {
    if (truth.rows() != z.rows() || truth.cols() != z.cols() || split.train.rows() != z.rows() ||
        split.train.cols() != z.cols() || split.test.rows() != z.rows() || split.test.cols() != z.cols())
        throw ConfigError("train_test_error: shape mismatch");
    if (split.train.count() == 0) throw ConfigError("train_test_error: empty training set");
}

ErrorReport errors_only(const Matrix& truth, const Matrix& z, const SplitMask& split) {
    check_shapes(truth, z, split);
    ErrorReport r;
    r.train_mse = masked_mse(truth, z, split.train);
    if (split.test.count() > 0) r.test_mse = masked_mse(truth, z, split.test);
    return r;
}

std::vector<double> member_mean(const Matrix& a, const Group& g) {
    g.validate(a.rows());
    std::vector<double> out(a.cols(), 0.0);
    for (auto i : g.members) {
        auto row = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += row[j];
    }
    for (auto& v : out) v /= static_cast<double>(g.size());
    return out;
}

} // namespace

ErrorReport train_test_error(const Matrix& truth, const Matrix& z, const SplitMask& split, double rank_tolerance) {
    auto r = errors_only(truth, z, split);
    const auto f = svd(z);
    r.nuclear_norm = std::accumulate(f.sigma.begin(), f.sigma.end(), 0.0);
    r.rank = numerical_rank(f.sigma, rank_tolerance);
    return r;
}

ErrorReport train_test_error(const Matrix& truth, const ThresholdedMatrix& solution, const SplitMask& split,
                             double lambda) {
    auto r = errors_only(truth, solution.z, split);
    r.lambda = lambda;
    r.nuclear_norm = solution.nuclear_norm;
    r.rank = solution.rank;
    return r;
}

std::vector<double> group_reference(const Matrix& truth, const Group& g) { return member_mean(truth, g); }

std::vector<double> group_prediction_aggregate(const Matrix& z, const Group& g) { return member_mean(z, g); }

MetricsAtK precision_recall_f1(std::span<const double> reference, std::span<const double> predicted, std::size_t k,
                               double tau, std::span<const std::size_t> candidates) {
    if (reference.size() != predicted.size()) throw ConfigError("metrics: reference and prediction lengths differ");
    if (candidates.empty()) throw ConfigError("metrics: empty candidate set");
    if (k < 1 || k > candidates.size()) throw ConfigError("metrics: k must lie in [1, |candidates|]");
    for (auto j : candidates) {
        if (j >= predicted.size()) throw ConfigError("metrics: candidate index out of range");
        if (!std::isfinite(predicted[j])) throw ConfigError("metrics: non-finite prediction");
    }

    std::vector<std::size_t> ranked(candidates.begin(), candidates.end());
    std::sort(ranked.begin(), ranked.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t a, std::size_t b) { return predicted[a] > predicted[b]; });

    std::size_t relevant = 0;
    for (double r : reference) relevant += r >= tau;

    MetricsAtK m;
    m.k = k;
    for (std::size_t t = 0; t < k; ++t) m.tp += reference[ranked[t]] >= tau;
    m.fp = k - m.tp;
    m.fn = relevant - m.tp;
    m.precision = static_cast<double>(m.tp) / static_cast<double>(k);
    if (relevant > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(relevant);
    const double r = m.recall.value_or(0.0);
    m.f1 = m.precision + r > 0.0 ? 2.0 * m.precision * r / (m.precision + r) : 0.0;
    return m;
}

MetricsAtK precision_recall_f1(std::span<const double> reference, std::span<const double> predicted, std::size_t k,
                               double tau) {
    std::vector<std::size_t> all(predicted.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return precision_recall_f1(reference, predicted, k, tau, all);
}

std::vector<std::size_t> candidate_items(const ObservedSet& train, const Group& g, CandidateMode mode) {
    g.validate(train.rows());
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < train.cols(); ++j) {
        if (mode == CandidateMode::exclude_jointly_observed &&
            std::all_of(g.members.begin(), g.members.end(), [&](std::size_t i) { return train.contains(i, j); }))
            continue;
        out.push_back(j);
    }
    return out;
}

std::vector<ErrorReport> error_curve(const SoftImputePath& path, const Matrix& truth, const SplitMask& split) {
    std::vector<ErrorReport> out;
    for (std::size_t k = 0; k < path.solutions.size(); ++k)
        out.push_back(train_test_error(truth, path.solutions[k], split, path.lambdas[k]));
    std::stable_sort(out.begin(), out.end(),
                     [](const ErrorReport& a, const ErrorReport& b) { return a.nuclear_norm < b.nuclear_norm; });
    return out;
}

ConvergenceSeries convergence_series(const ConvergenceTrace& trace) {
    ConvergenceSeries s;
    for (std::size_t k = 0; k < trace.relative_errors.size(); ++k) {
        const double e = trace.relative_errors[k];
        if (e > 0.0) {
            s.points.emplace_back(k, std::log10(e));
        } else {
            ++s.zero_errors;
        }
    }
    return s;
}

std::string_view to_string(Method m) {
    switch (m) {
    case Method::gsi: return "gsi";
    case Method::wbf: return "wbf";
    case Method::af: return "af";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (auto m : {Method::gsi, Method::wbf, Method::af})
        if (name == to_string(m)) return m;
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

RankTable rank_recovery_experiment(std::span<const RankDataset> datasets, std::span<const Method> methods,
                                   std::span<const double> lambdas, const RankExperimentConfig& config) {
    if (methods.empty()) throw ConfigError("rank table: no methods configured");
    if (lambdas.empty()) throw ConfigError("rank table: no lambda values configured");

    RankTable table;
    table.lambdas.assign(lambdas.begin(), lambdas.end());
    const double tol = config.softimpute.rank_tolerance;

    for (const auto& ds : datasets) {
        for (auto method : methods) {
            if (method == Method::gsi) {
                std::map<double, std::size_t> rank_at;
                bool failed = false;
                try {
                    const auto aug = augment(ds.x, aggregate_group(ds.x, ds.group, config.divisor));
                    const auto path = soft_impute_path(aug.matrix, lambdas, config.softimpute);
                    for (std::size_t k = 0; k < path.lambdas.size(); ++k)
                        rank_at[path.lambdas[k]] = path.solutions[k].rank;
                } catch (const NumericalError&) {
                    failed = true;
                }
                for (double l : lambdas) {
                    RankCell cell{ds.name, method, l, std::nullopt, 0};
                    if (!failed) cell.rank = rank_at.at(l);
                    table.cells.push_back(cell);
                }
                continue;
            }
            for (double l : lambdas) {
                RankCell cell{ds.name, method, l, std::nullopt, config.als.rank};
                try {
                    AlsConfig als = config.als;
                    als.reg_lambda = l;
                    const auto pred = method == Method::wbf
                                          ? wbf(ds.x, ds.group, aggregate_group(ds.x, ds.group, config.divisor), als)
                                          : af(ds.x, ds.group, config.af_kind, als);
                    cell.rank = numerical_rank(svd(predict(pred.factors)).sigma, tol);
                } catch (const NumericalError&) {
                }
                table.cells.push_back(cell);
            }
        }
    }
    return table;
}

} // namespace gsi
