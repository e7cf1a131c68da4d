#include "gsi/group.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gsi/errors.hpp"

namespace gsi {

void Group::validate(std::size_t user_count) const {
    if (members.empty()) throw ConfigError("group '" + id + "' is empty");
    std::set<std::size_t> seen;
    for (auto u : members) {
        if (u >= user_count) {
            std::ostringstream msg;
            msg << "group '" << id << "': member " << u << " out of range (" << user_count << " users)";
            throw ConfigError(msg.str());
        }
        if (!seen.insert(u).second) throw ConfigError("group '" + id + "': duplicate member");
    }
}

GroupAggregate aggregate_group(const RatingMatrix& x, const Group& g, MeanDivisor divisor) {
    g.validate(x.rows());
    const std::size_t n = x.cols();
    const double size = static_cast<double>(g.size());

    GroupAggregate agg;
    agg.group_size = g.size();
    agg.mean_ratings.assign(n, 0.0);
    agg.weights.assign(n, 0.0);
    agg.rater_counts.assign(n, 0);
    agg.std_devs.assign(n, 0.0);
    agg.rated_mask.assign(n, false);

    for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (auto i : g.members) {
            if (!x.is_observed(i, j)) continue;
            sum += x(i, j);
            ++count;
        }
        if (count == 0) continue;
        const double mean = sum / static_cast<double>(count);
        double ss = 0.0;
        for (auto i : g.members)
            if (x.is_observed(i, j)) ss += (x(i, j) - mean) * (x(i, j) - mean);
        const double sd = std::sqrt(ss / static_cast<double>(count));

        agg.rated_mask[j] = true;
        agg.rater_counts[j] = count;
        agg.std_devs[j] = sd;
        agg.mean_ratings[j] = divisor == MeanDivisor::rater_count ? mean : sum / size;
        agg.weights[j] = (static_cast<double>(count) / size) * (1.0 / (1.0 + sd));
    }
    return agg;
}

AugmentedMatrix augment(const RatingMatrix& x, const GroupAggregate& agg) {
    if (agg.items() != x.cols()) throw ConfigError("augment: aggregate does not match the matrix width");
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    Matrix values(m + 1, n);
    ObservedSet omega(m + 1, n);
    for (std::size_t i = 0; i < m; ++i) {
        auto src = x.values().row(i);
        std::copy(src.begin(), src.end(), values.row(i).begin());
        for (std::size_t j = 0; j < n; ++j)
            if (x.is_observed(i, j)) omega.insert(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (!agg.rated_mask[j]) continue;
        values(m, j) = agg.mean_ratings[j] * agg.weights[j];
        omega.insert(m, j);
    }
    return {RatingMatrix(std::move(values), std::move(omega)), m};
}

std::string_view to_string(AggregationKind kind) {
    switch (kind) {
    case AggregationKind::average: return "average";
    case AggregationKind::weighted_average: return "weighted_average";
    case AggregationKind::minimum: return "minimum";
    case AggregationKind::maximum: return "maximum";
    }
    return "?";
}

AggregationKind parse_aggregation(std::string_view name) {
    for (auto k : {AggregationKind::average, AggregationKind::weighted_average, AggregationKind::minimum,
                   AggregationKind::maximum})
        if (name == to_string(k)) return k;
    throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

namespace {

GsiResult finish_gsi(SoftImputePath path) {
    GsiResult out;
    out.selected = path.solutions.size() - 1;
    for (std::size_t k = path.traces.size(); k-- > 0;) {
        if (path.traces[k].converged) {
            out.selected = k;
            break;
        }
    }
    out.completed = path.solutions[out.selected].z;
    auto last = out.completed.row(out.completed.rows() - 1);
    out.group_ratings.assign(last.begin(), last.end());
    out.path = std::move(path);
    return out;
}

std::vector<double> profile_predictions(std::span<const double> profile, const Matrix& item_factors) {
    std::vector<double> out(item_factors.rows());
    for (std::size_t j = 0; j < item_factors.rows(); ++j) out[j] = dot(profile, item_factors.row(j));
    return out;
}

} // namespace

GsiResult gsi_svd(const RatingMatrix& x, const Group& g, const SoftImputeConfig& config, MeanDivisor divisor) {
    const auto aug = augment(x, aggregate_group(x, g, divisor));
    return finish_gsi(soft_impute_path(aug.matrix, config));
}

GsiResult gsi_svd(const RatingMatrix& x, const Group& g, std::span<const double> lambdas,
                  const SoftImputeConfig& config, MeanDivisor divisor) {
    const auto aug = augment(x, aggregate_group(x, g, divisor));
    return finish_gsi(soft_impute_path(aug.matrix, lambdas, config));
}

GroupPrediction wbf(const RatingMatrix& x, const Group& g, const GroupAggregate& agg, const AlsConfig& config) {
    g.validate(x.rows());
    const auto aug = augment(x, agg);
    auto fit = als_fit(aug.matrix, config);
    GroupPrediction out;
    out.ratings = profile_predictions(fit.factors.user_factors.row(aug.group_row), fit.factors.item_factors);
    out.factors = std::move(fit.factors);
    out.sweeps = fit.sweeps;
    out.converged = fit.converged;
    return out;
}

std::vector<double> aggregate_profile(const FactorPair& factors, const RatingMatrix& x, const Group& g,
                                      AggregationKind kind) {
    g.validate(factors.user_factors.rows());
    const std::size_t r = factors.rank();
    const auto& u = factors.user_factors;
    std::vector<double> profile(r, 0.0);

    switch (kind) {
    case AggregationKind::average:
        for (auto i : g.members)
            for (std::size_t k = 0; k < r; ++k) profile[k] += u(i, k);
        for (auto& p : profile) p /= static_cast<double>(g.size());
        break;
    case AggregationKind::weighted_average: {
        std::vector<double> w;
        double total = 0.0;
        for (auto i : g.members) {
            w.push_back(static_cast<double>(x.observed().row_count(i)));
            total += w.back();
        }
        if (total == 0.0) {
            std::fill(w.begin(), w.end(), 1.0);
            total = static_cast<double>(w.size());
        }
        for (std::size_t a = 0; a < g.size(); ++a)
            for (std::size_t k = 0; k < r; ++k) profile[k] += (w[a] / total) * u(g.members[a], k);
        break;
    }
    case AggregationKind::minimum:
    case AggregationKind::maximum:
        for (std::size_t k = 0; k < r; ++k) {
            double best = u(g.members.front(), k);
            for (auto i : g.members)
                best = kind == AggregationKind::minimum ? std::min(best, u(i, k)) : std::max(best, u(i, k));
            profile[k] = best;
        }
        break;
    }
    return profile;
}

std::vector<double> af_from_factors(const FactorPair& factors, const RatingMatrix& x, const Group& g,
                                    AggregationKind kind) {
    return profile_predictions(aggregate_profile(factors, x, g, kind), factors.item_factors);
}

GroupPrediction af(const RatingMatrix& x, const Group& g, AggregationKind kind, const AlsConfig& config) {
    g.validate(x.rows());
    auto fit = als_fit(x, config);
    GroupPrediction out;
    out.ratings = af_from_factors(fit.factors, x, g, kind);
    out.factors = std::move(fit.factors);
    out.sweeps = fit.sweeps;
    out.converged = fit.converged;
    return out;
}

} // namespace gsi
