#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gsi/als.hpp"
#include "gsi/rating_matrix.hpp"
#include "gsi/softimpute.hpp"

namespace gsi {

struct Group {
    std::string id;
    std::vector<std::size_t> members;

    std::size_t size() const noexcept { return members.size(); }
    /// Throws ConfigError if empty, duplicated, or any member >= user_count.
    void validate(std::size_t user_count) const;
};

/// How the group mean of an item is normalised.
enum class MeanDivisor {
    rater_count, ///< mean over the members who rated the item
    group_size,  ///< literal 1/|G| reading, raters only in the sum
};

/// Per-item group statistics over the members' observed ratings.
struct GroupAggregate {
    std::vector<double> mean_ratings; ///< 0 where no member rated the item
    std::vector<double> weights;      ///< (raters/|G|)·1/(1+σ); 0 where unrated
    std::vector<std::size_t> rater_counts;
    std::vector<double> std_devs; ///< population standard deviation of member ratings
    std::vector<bool> rated_mask;
    std::size_t group_size = 0;

    std::size_t items() const noexcept { return mean_ratings.size(); }
};

GroupAggregate aggregate_group(const RatingMatrix& x, const Group& g,
                               MeanDivisor divisor = MeanDivisor::rater_count);

/// x with one extra row holding mean·weight on the items the group rated.
struct AugmentedMatrix {
    RatingMatrix matrix;
    std::size_t group_row = 0;
};

AugmentedMatrix augment(const RatingMatrix& x, const GroupAggregate& agg);

enum class AggregationKind { average, weighted_average, minimum, maximum };

std::string_view to_string(AggregationKind kind);
/// Accepts "average", "weighted_average", "minimum", "maximum"; throws ConfigError otherwise.
AggregationKind parse_aggregation(std::string_view name);

struct GsiResult {
    Matrix completed;                 ///< (m+1)×n solution at the selected grid point
    std::vector<double> group_ratings; ///< last row of `completed`
    SoftImputePath path;
    std::size_t selected = 0; ///< index into path of the returned solution
};

/// Group soft-impute: aggregate, augment, run the warm-started λ path, and
/// read the group's predicted ratings off the appended row of the solution at
/// the smallest λ that converged (the last grid point if none did).
GsiResult gsi_svd(const RatingMatrix& x, const Group& g, const SoftImputeConfig& config,
                  MeanDivisor divisor = MeanDivisor::rater_count);

/// Same, over an explicit λ list instead of the σ_max-anchored grid.
GsiResult gsi_svd(const RatingMatrix& x, const Group& g, std::span<const double> lambdas,
                  const SoftImputeConfig& config, MeanDivisor divisor = MeanDivisor::rater_count);

struct GroupPrediction {
    std::vector<double> ratings; ///< length n
    FactorPair factors;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Weighted-before-factorisation: factorise the augmented matrix and predict
/// from the pseudo-user's factor row.
GroupPrediction wbf(const RatingMatrix& x, const Group& g, const GroupAggregate& agg, const AlsConfig& config);

/// After-factorisation: factorise x, combine the members' user factors with
/// `kind`, and predict from the combined profile.
GroupPrediction af(const RatingMatrix& x, const Group& g, AggregationKind kind, const AlsConfig& config);

/// AF on an existing factorisation of x (lets many groups share one fit).
std::vector<double> af_from_factors(const FactorPair& factors, const RatingMatrix& x, const Group& g,
                                    AggregationKind kind);

/// Combined user profile u_G for the members of g.
std::vector<double> aggregate_profile(const FactorPair& factors, const RatingMatrix& x, const Group& g,
                                      AggregationKind kind);

} // namespace gsi
