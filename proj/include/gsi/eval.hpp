#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsi/data.hpp"
#include "gsi/group.hpp"
#include "gsi/softimpute.hpp"

namespace gsi {

/// Train/test mean squared error of a completion, with its size measures.
struct ErrorReport {
    double lambda = 0.0;
    double train_mse = 0.0;
    std::optional<double> test_mse; ///< absent when the test set is empty
    double nuclear_norm = 0.0;
    std::size_t rank = 0;
};

/// MSE of z against truth over split.train and split.test; nuclear norm and
/// rank come from an SVD of z.
ErrorReport train_test_error(const Matrix& truth, const Matrix& z, const SplitMask& split,
                             double rank_tolerance = kRankTolerance);

/// Same, reusing the size measures of a soft-impute solution.
ErrorReport train_test_error(const Matrix& truth, const ThresholdedMatrix& solution, const SplitMask& split,
                             double lambda);

/// Item-wise mean of the members' rows of the ground truth (divisor |G|).
std::vector<double> group_reference(const Matrix& truth, const Group& g);

/// Item-wise mean of the members' rows of a completed matrix.
std::vector<double> group_prediction_aggregate(const Matrix& z, const Group& g);

struct MetricsAtK {
    double precision = 0.0;
    std::optional<double> recall; ///< absent when no item is relevant
    double f1 = 0.0;
    std::size_t k = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::string group_id;
    std::string method;
};

/// Top-k of `predicted` over `candidates` (ties by ascending item index) scored
/// against every item with reference[j] >= tau. Relevant items outside the
/// candidate set can only count as false negatives.
/// Throws ConfigError on an empty candidate set or k > |candidates|.
MetricsAtK precision_recall_f1(std::span<const double> reference, std::span<const double> predicted, std::size_t k,
                               double tau, std::span<const std::size_t> candidates);

/// Overload scoring over every item.
MetricsAtK precision_recall_f1(std::span<const double> reference, std::span<const double> predicted, std::size_t k,
                               double tau);

enum class CandidateMode {
    exclude_jointly_observed, ///< drop items every member rated in training
    all_items,
};

std::vector<std::size_t> candidate_items(const ObservedSet& train, const Group& g, CandidateMode mode);

/// One report per grid point, ordered by ascending nuclear norm.
std::vector<ErrorReport> error_curve(const SoftImputePath& path, const Matrix& truth, const SplitMask& split);

struct ConvergenceSeries {
    std::vector<std::pair<std::size_t, double>> points; ///< (iteration, log10 relative error)
    std::size_t zero_errors = 0;                        ///< entries dropped because log10(0) is undefined
};

ConvergenceSeries convergence_series(const ConvergenceTrace& trace);

enum class Method { gsi, wbf, af };
std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct RankCell {
    std::string dataset;
    Method method = Method::gsi;
    double lambda = 0.0;
    std::optional<std::size_t> rank; ///< absent if the method failed
    std::size_t factor_rank = 0;     ///< r for WBF/AF, 0 for GSI
};

struct RankTable {
    std::vector<RankCell> cells;
    std::vector<double> lambdas;
};

struct RankDataset {
    std::string name;
    RatingMatrix x;
    Group group;
};

struct RankExperimentConfig {
    SoftImputeConfig softimpute;
    AlsConfig als;
    AggregationKind af_kind = AggregationKind::average;
    MeanDivisor divisor = MeanDivisor::rater_count;
};

/// Recovered rank (at rank_tolerance) of each method's completed matrix for
/// every (dataset, method, λ). λ is the nuclear-norm weight for GSI and the
/// ridge weight for WBF/AF. GSI visits the λ list as one warm-started path.
RankTable rank_recovery_experiment(std::span<const RankDataset> datasets, std::span<const Method> methods,
                                   std::span<const double> lambdas, const RankExperimentConfig& config);

} // namespace gsi
