#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gsi/rating_matrix.hpp"
#include "gsi/svd.hpp"

namespace gsi {

struct SoftImputeConfig {
    std::size_t grid_size = 10;
    double lambda_min = 1.0;
    double epsilon = 1e-5;
    std::size_t max_iters = 500;
    double rank_tolerance = kRankTolerance;
    /// Seed and scale of the random start used at the first grid point.
    std::uint64_t seed = 42;
    double init_scale = 0.01;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Per-iteration convergence record of one soft-impute run.
///
/// relative_errors[k] is the quantity tested against epsilon at iteration k:
/// ||Z_new − Z_old||²_F / ||Z_old||²_F, or the absolute squared change when
/// Z_old = 0.
struct ConvergenceTrace {
    std::vector<double> relative_errors;
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<double> estimated_rho;
};

struct SoftImputeResult {
    ThresholdedMatrix solution;
    ConvergenceTrace trace;
};

struct SoftImputePath {
    std::vector<double> lambdas; ///< strictly descending
    std::vector<ThresholdedMatrix> solutions;
    std::vector<ConvergenceTrace> traces;

    std::size_t total_iterations() const;
};

/// Geometric grid of `size` values from lambda_max down to lambda_min; the
/// endpoints are exact. Throws ConfigError unless lambda_max > lambda_min > 0
/// (a single-point grid only needs lambda_max > 0).
std::vector<double> geometric_grid(double lambda_max, double lambda_min, std::size_t size);

/// Grid for `x` starting at σ_max(P_Ω(x)). Throws DegenerateInputError when
/// P_Ω(x) is zero.
std::vector<double> lambda_grid(const RatingMatrix& x, const SoftImputeConfig& config);

/// ½||P_Ω(X − Z)||²_F + λ||Z||_*, the objective whose minimiser is the
/// soft-impute fixed point.
double completion_objective(const RatingMatrix& x, const Matrix& z, double lambda);

/// Iterates Z ← S_λ(P_Ω(X) + P_Ω⊥(Z)) from z_init until the tested change
/// drops below epsilon or max_iters is reached (converged = false).
SoftImputeResult soft_impute(const RatingMatrix& x, double lambda, const Matrix& z_init,
                             const SoftImputeConfig& config);

/// i.i.d. normal(0, init_scale²) start matrix drawn from config.seed.
Matrix random_start(std::size_t rows, std::size_t cols, const SoftImputeConfig& config);

/// Warm-started path over lambda_grid(x, config).
SoftImputePath soft_impute_path(const RatingMatrix& x, const SoftImputeConfig& config);

/// Warm-started path over explicit λ values (visited in descending order,
/// duplicates removed). If `warm_start` is false every point restarts from
/// the same random start.
SoftImputePath soft_impute_path(const RatingMatrix& x, std::span<const double> lambdas,
                                const SoftImputeConfig& config, bool warm_start = true);

/// exp(slope) of a least-squares line through log(relative error) against the
/// iteration index over the tail half of the trace. Zero entries are skipped.
/// Throws InsufficientDataError with fewer than 5 iterations.
double estimate_contraction_rate(const ConvergenceTrace& trace);

/// Least-squares fit of y against x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

} // namespace gsi
